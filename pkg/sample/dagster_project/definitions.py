import os

from dagster import Definitions, InMemoryIOManager, define_asset_job

from dagster_fracmonge import ExperimentResource, SuiteTranslator, load_experiment_config, suite_assets

CURR_DIR = os.path.dirname(__file__)
EXPERIMENT_PATH = os.path.abspath(os.path.join(CURR_DIR, "../experiments/interval.toml"))
OUTPUT_DIR = os.path.abspath(os.path.join(CURR_DIR, "../out/interval"))


class IntervalTranslator(SuiteTranslator):
    """Puts every suite of this experiment under its own key prefix and
    group so several experiments can live in one code location."""

    def __init__(self) -> None:
        super().__init__(prefix=("fracmonge", "interval"), group_name="interval")


experiment_config = load_experiment_config(EXPERIMENT_PATH)

all_suites_job = define_asset_job(name="all_suites_job")

defs = Definitions(
    assets=suite_assets(translator=IntervalTranslator()),
    resources={
        "experiment": ExperimentResource.from_config(experiment_config, OUTPUT_DIR),
        # suite payloads hold sections and sparse operators, keep them in memory
        "io_manager": InMemoryIOManager(),
    },
    jobs=[all_suites_job],
)
