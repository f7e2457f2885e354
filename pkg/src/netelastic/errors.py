"""Exception hierarchy shared by every module."""


class NetworkElasticNetError(Exception):
    """Base class for all errors raised by netelastic."""


class InvalidInputError(NetworkElasticNetError, ValueError):
    pass


class DegenerateKernelError(NetworkElasticNetError):
    pass


class DegenerateDataError(NetworkElasticNetError):
    pass


class SingularSystemError(NetworkElasticNetError):
    def __init__(self, node_id, message=None):
        self.node_id = node_id
        super().__init__(message or f"singular x-update system at node {node_id}")


class DivergenceError(NetworkElasticNetError):
    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


class SchemaError(NetworkElasticNetError):
    pass


class ParseError(NetworkElasticNetError):
    pass
