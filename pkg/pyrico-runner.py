#! /usr/bin/env python3


"""pyrico-runner: Convenience script for running pyrico from the source tree"""


from pyrico.cli import main

if __name__ == '__main__':
    main()
