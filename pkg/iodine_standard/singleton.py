"""
A decorator that makes a class a singleton
"""


# pylint: disable=too-few-public-methods
class Singleton:
    """
    Wraps a class so every call returns the one shared instance

    Attributes
    ----------
    instances : dict
        Shared instances, by class name
    """

    instances = {}

    def __init__(self, clz: type) -> None:
        """
        Parameters
        ----------
        clz : type
            The class to wrap
        """
        self.clz = clz
        self.__doc__ = clz.__doc__
        self.__name__ = clz.__name__

    def __call__(self, *args, **kwargs):
        """
        Returns the shared instance, creating it on first use
        """
        if self.__name__ not in Singleton.instances:
            Singleton.instances[self.__name__] = self.clz(*args, **kwargs)
        return Singleton.instances[self.__name__]
