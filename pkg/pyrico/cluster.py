"""Setup and teardown of the local dask cluster that runs comparison sweep points in parallel"""


from .printing import PyricoError
from .config import init_logging, reinit_logging

from distributed import Client, LocalCluster
from dask import __version__ as daskv
from distributed import __version__ as distributedv

import logging


logger = logging.getLogger(__name__)


class Cluster:
    """
    Owns a LocalCluster and the dask Client connected to it. The client is accessible as Cluster.client
    """

    def __init__(self, parallel_count, log_prefix=None, debug=False, log_level_name='warning'):
        """
        :param parallel_count: Number of single-threaded worker processes
        :type parallel_count: int
        :param log_prefix: Log file prefix passed on to the workers
        :type log_prefix: str
        :param debug: Whether debug mode is active
        :type debug: bool
        :param log_level_name: The logging level for the application
        :type log_level_name: str
        """
        if parallel_count < 1:
            raise PyricoError('Number of parallel workers must be at least 1, got %s' % parallel_count)
        logger.info('Initializing dask Client with dask v%s, distributed v%s', daskv, distributedv)
        logger.info('Creating a local client with %i workers', parallel_count)
        self._local_cluster = LocalCluster(n_workers=parallel_count, threads_per_worker=1)
        self.client = Client(self._local_cluster)
        self.client.run(init_logging, log_prefix, debug, log_level_name)

        # Client() replaces the root handlers of this process
        reinit_logging(log_prefix, debug, log_level_name)

    def map(self, func, items):
        """
        Runs func on every item on the workers

        :return: Results in the order of items
        :rtype: list
        """
        futures = self.client.map(func, items, pure=False)
        return self.client.gather(futures)

    def teardown(self):
        logger.info('Closing client')
        self.client.close()
        self._local_cluster.close()
