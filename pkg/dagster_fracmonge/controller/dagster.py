import logging

import dagster as dg

from dagster_fracmonge.asset import RESOURCE_KEY, suite_assets
from dagster_fracmonge.config import ConfigError
from dagster_fracmonge.console import CriterionEvaluated, SuiteCompleted, SuiteFailed
from dagster_fracmonge.controller.base import ExperimentController, ExperimentRun
from dagster_fracmonge.resource import ExperimentResource, SuiteFailedError
from dagster_fracmonge.translator import SuiteTranslator

logger = logging.getLogger(__name__)


class DagsterExperimentController(ExperimentController):
    """An extension of the experiment controller that materializes the suites
    as dagster assets in memory. Suite payloads pass between assets through
    the in-memory io manager."""

    translator: SuiteTranslator = SuiteTranslator()

    def execute(self, run: ExperimentRun) -> None:
        if not run.order:
            return
        assets = suite_assets(suites=run.order, translator=self.translator, scheduler=self.scheduler)
        keys = [self.translator.get_asset_key(suite) for suite in run.order]
        resource = ExperimentResource.from_config(self.config, self.output_dir)
        result = dg.materialize_to_memory(
            assets,
            resources={RESOURCE_KEY: resource},
            selection=dg.AssetSelection.assets(*keys),
            raise_on_error=False,
        )

        failure_messages: dict[str, str] = {}
        unexpected: list[str] = []
        for event in result.get_step_failure_events():
            chain = []
            error = event.step_failure_data.error
            while error is not None:
                chain.append(error)
                error = error.cause
            # dagster wraps user errors, the root cause carries the message
            root = chain[-1] if chain else None
            message = root.message.strip() if root else "unknown error"
            failure_messages[event.step_key or ""] = message
            config_error = next((e for e in chain if e.cls_name == ConfigError.__name__), None)
            if config_error is not None:
                # the message starts with the qualified class name
                raise ConfigError(config_error.message.strip().split(": ", 1)[-1])
            if not any(e.cls_name == SuiteFailedError.__name__ for e in chain):
                unexpected.append(f"{event.step_key}: {root.cls_name if root else 'unknown'}: {message}")
        if unexpected:
            raise RuntimeError(f"suites raised unexpected errors: {'; '.join(unexpected)}")

        for suite, key in zip(run.order, keys):
            node = key.to_python_identifier()
            if result.is_node_success(node):
                suite_result = result.asset_value(key)
                run.results[suite] = suite_result
                for criterion in suite_result.criteria:
                    self.console.publish(CriterionEvaluated(suite=suite, criterion=criterion))
                self.console.publish(SuiteCompleted(suite=suite, result=suite_result))
                continue
            message = failure_messages.get(node, "upstream suite did not materialize")
            error = SuiteFailedError(suite, f"suite {suite} failed: {message}", [])
            run.failures[suite] = error
            self.console.publish(SuiteFailed(suite=suite, error=error))
