import logging
import typing as t

import dagster as dg

from dagster_fracmonge.config import ALL_SUITES
from dagster_fracmonge.resource import ExperimentResource
from dagster_fracmonge.scheduler import SuiteScheduler
from dagster_fracmonge.suites import criteria_for
from dagster_fracmonge.translator import SuiteTranslator
from dagster_fracmonge.types import SuiteName, SuiteResult

logger = logging.getLogger(__name__)

RESOURCE_KEY = "experiment"


def suite_asset(
    suite: SuiteName,
    *,
    translator: SuiteTranslator,
    scheduler: SuiteScheduler,
    resource_key: str = RESOURCE_KEY,
    retry_policy: dg.RetryPolicy | None = None,
) -> dg.AssetsDefinition:
    """Creates the dagster asset for one suite. Upstream suites are asset
    inputs named after the suite, and every criterion the suite owns is an
    asset check on it."""
    asset_key = translator.get_asset_key(suite)
    ins = {upstream: dg.AssetIn(key=translator.get_asset_key(upstream)) for upstream in scheduler.upstream(suite)}
    check_specs = [
        dg.AssetCheckSpec(
            name=translator.get_check_name(spec.criterion_id),
            asset=asset_key,
            description=spec.description,
        )
        for spec in criteria_for(suite)
    ]

    @dg.asset(
        key=asset_key,
        ins=ins,
        group_name=translator.get_group_name(suite),
        kinds=translator.get_kinds(suite),
        tags=translator.get_tags(suite),
        check_specs=check_specs,
        required_resource_keys={resource_key},
        retry_policy=retry_policy,
    )
    def compute(context: dg.AssetExecutionContext, **upstream: SuiteResult) -> t.Iterator[t.Any]:
        resource: ExperimentResource = getattr(context.resources, resource_key)
        yield from resource.run(context, suite=suite, upstream=upstream, translator=translator)

    return compute


def suite_assets(
    *,
    suites: t.Iterable[SuiteName] | None = None,
    translator: SuiteTranslator | None = None,
    scheduler: SuiteScheduler | None = None,
    resource_key: str = RESOURCE_KEY,
    retry_policy: dg.RetryPolicy | None = None,
) -> list[dg.AssetsDefinition]:
    """Assets for the requested suites and everything they depend on, in
    dependency order."""
    translator = translator or SuiteTranslator()
    scheduler = scheduler or SuiteScheduler()
    ordered = scheduler.order(ALL_SUITES if suites is None else suites)
    logger.debug(f"building assets for suites: {', '.join(ordered)}")
    return [
        suite_asset(
            suite,
            translator=translator,
            scheduler=scheduler,
            resource_key=resource_key,
            retry_policy=retry_policy,
        )
        for suite in ordered
    ]
