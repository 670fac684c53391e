"""
A singleton registry of runnable scenarios
"""

from iodine_standard.errors import UnknownScenarioError
from iodine_standard.singleton import Singleton


@Singleton
class ScenarioTracker:
    """
    Tracks scenario functions by name

    Attributes
    ----------
    scenarios_by_name : dictionary
        Scenario callables, in registration order
    descriptions : dictionary
        One-line description of each scenario
    """

    def __init__(self) -> "ScenarioTracker":
        """
        Creates the empty registry
        """
        self.scenarios_by_name = {}
        self.descriptions = {}

    def __check_name(self, name: str) -> None:
        """
        Checks that a scenario name is not already used

        Parameters
        ----------
        name : string
            The name to check
        """
        if name in self.scenarios_by_name:
            raise ValueError('Scenario "{0}" is already registered!'.format(name))

    def add_scenario(self, name: str, func, description: str = "") -> None:
        """
        Registers a scenario

        Parameters
        ----------
        name : string
            Name used on the command line
        func : callable
            Called as func(config, seed, out_dir)
        description : string
            Shown in the help text
        """
        self.__check_name(name)
        if not callable(func):
            raise TypeError("Scenario provided is not callable!")
        self.scenarios_by_name[name] = func
        self.descriptions[name] = description

    def get_scenario(self, name: str):
        """
        Gets a scenario by name

        Parameters
        ----------
        name : string
            The name to look up

        Returns
        -------
        callable
            The scenario function
        """
        if name not in self.scenarios_by_name:
            raise UnknownScenarioError(
                "No such scenario: {0}! Known: {1}".format(
                    name, ", ".join(self.names())
                )
            )
        return self.scenarios_by_name[name]

    def has_scenario(self, name: str) -> bool:
        """
        Whether a name is registered
        """
        return name in self.scenarios_by_name

    def names(self) -> list:
        """
        Registered names, in registration order
        """
        return list(self.scenarios_by_name.keys())

    def resolve(self, selection: str) -> list:
        """
        Expand a comma-separated selection, or "all"

        Parameters
        ----------
        selection : string
            e.g. "lock-run,allan" or "all"

        Returns
        -------
        list
            Scenario names, unknown names raising UnknownScenarioError
        """
        if selection.strip() == "all":
            return self.names()
        names = [name.strip() for name in selection.split(",") if name.strip()]
        for name in names:
            self.get_scenario(name)
        return names

    def reset(self) -> None:
        """
        Reset the registry
        """
        self.scenarios_by_name = {}
        self.descriptions = {}
