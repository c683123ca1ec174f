"""pyrico.__main__: executed when directory is called as a script"""

from .cli import main

main()
