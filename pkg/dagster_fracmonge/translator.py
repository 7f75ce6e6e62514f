from collections.abc import Sequence

from dagster import AssetCheckKey, AssetKey

from .types import SuiteName


class SuiteTranslator:
    """Translates experiment suites for Dagster.

    This class provides methods to name the Dagster assets and asset checks
    that stand for suites and their acceptance criteria. It can be subclassed
    to customize the translation behavior, such as prefixing asset keys or
    changing the grouping logic.

    The translator is used throughout the integration, including in the
    DagsterSuiteEventHandler and the asset factory.
    """

    def __init__(self, prefix: Sequence[str] = ("fracmonge",), group_name: str = "fracmonge") -> None:
        self.prefix = tuple(prefix)
        self.group_name = group_name

    def get_asset_key(self, suite: SuiteName) -> AssetKey:
        """Get the Dagster AssetKey for a suite.

        Args:
            suite: The suite name

        Returns:
            AssetKey: The Dagster asset key for this suite
        """
        return AssetKey([*self.prefix, suite])

    def get_group_name(self, suite: SuiteName) -> str:
        """Get the Dagster asset group name for a suite.

        Args:
            suite: The suite name (unused in default implementation)

        Returns:
            str: The asset group name
        """
        return self.group_name

    def get_check_name(self, criterion_id: str) -> str:
        """Get the asset check name of an acceptance criterion.

        Args:
            criterion_id: The criterion identifier, e.g. "A3"

        Returns:
            str: The check name, e.g. "criterion_a3"
        """
        return f"criterion_{criterion_id.lower()}"

    def get_check_key(self, suite: SuiteName, criterion_id: str) -> AssetCheckKey:
        return AssetCheckKey(self.get_asset_key(suite), self.get_check_name(criterion_id))

    def get_kinds(self, suite: SuiteName) -> set[str]:
        """Get the Dagster kinds shown on the asset.

        Args:
            suite: The suite name (unused in default implementation)

        Returns:
            set[str]: The asset kinds
        """
        return {"python", "numpy"}

    def get_tags(self, suite: SuiteName) -> dict[str, str]:
        """Get Dagster asset tags for a suite.

        Args:
            suite: The suite name

        Returns:
            dict[str, str]: Tags to apply to the Dagster asset. Tags with empty
                string values are rendered by the Dagster UI as labels.
        """
        return {suite: ""}

    def get_asset_key_str(self, suite: SuiteName) -> str:
        """Get an identifier that is safe to use as a Dagster node name.

        Args:
            suite: The suite name

        Returns:
            str: The asset key joined by double underscores
        """
        return self.get_asset_key(suite).to_python_identifier()
