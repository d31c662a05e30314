#!/usr/bin/env python3
"""
obda-express
Main entry point for the command-line tool

Decides whether a source query can be expressed over the target vocabulary
of an OBDA specification, verifies candidate realizations, and exposes the
rewriting, chase, containment and instance-generation machinery behind it.
"""

import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Optional

import click

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core.config_manager import ConfigError, ConfigManager, RunConfig
from core.decision import DecisionError, expressible, verify
from core.homomorphism import HomomorphismError, minimize_ucq, ucq_contained
from core.mapping_manager import MappingError, apply_forward_ucq
from core.oracle import (
    OracleError, Profile, brute_force_realization_check, default_max_domain, random_instance,
)
from core.qbf_reduction import QbfError, qbf_brute_eval, qbf_to_instance
from core.reasoner import OMQ, Reasoner, ReasonerError
from core.rewriting import RewritingError, canonical_rewriting_dllite, canonical_size_bound
from core.text_format import (
    ParseError, parse_database, parse_qbf, parse_query, parse_spec, read_text, render, verdict_json,
)
from models.query import QueryError
from models.spec import SpecValidationError
from models.verdict import Outcome, Verdict

logger = logging.getLogger(__name__)

ERROR_EXIT = 3
INTERRUPT_EXIT = 130

HANDLED_ERRORS = (
    ParseError, SpecValidationError, QueryError, HomomorphismError, MappingError, ReasonerError,
    RewritingError, DecisionError, OracleError, QbfError, ConfigError,
)


class ObdaGroup(click.Group):
    """Command group mapping every failure onto the exit-code contract"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            result = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = result if isinstance(result, int) else 0
        except click.Abort:
            click.echo("Interrupted", err=True)
            code = INTERRUPT_EXIT
        except click.ClickException as e:
            e.show()
            code = ERROR_EXIT
        except HANDLED_ERRORS as e:
            click.echo(f"Error: {e}", err=True)
            code = ERROR_EXIT
        except Exception as e:
            click.echo(f"Fatal error: {e}", err=True)
            logger.debug(traceback.format_exc())
            code = ERROR_EXIT
        if standalone_mode:
            sys.exit(code)
        return code


def budget_options(command):
    """Budget and search flags shared by check and verify"""
    defaults = RunConfig()
    options = [
        click.option('--max-abox', type=int, default=None,
                     help="Largest candidate ABox in facts (default: the size the instance requires)"),
        click.option('--max-core', type=int, default=None,
                     help=f"Core constants of pseudo tree-shaped ABoxes (default {defaults.max_core})"),
        click.option('--max-outdegree', type=int, default=None,
                     help=f"Children per tree node (default {defaults.max_outdegree})"),
        click.option('--max-depth', type=int, default=None,
                     help=f"Depth of the trees below the core (default {defaults.max_depth})"),
        click.option('--max-choices', type=int, default=None,
                     help="Cap on backward mapping choices per candidate (default unlimited)"),
        click.option('--exhaustive/--bounded', default=None,
                     help="Treat the budgets as complete (default bounded)"),
        click.option('--consistent-only/--all-databases', default=None,
                     help="Ignore source databases whose image is inconsistent"),
        click.option('--jobs', type=int, default=None, help=f"Worker threads (default {defaults.jobs})"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _run_config(ctx: click.Context, **flags) -> RunConfig:
    """Layer CLI flags over the configuration loaded by the group"""
    return ctx.obj['config'].merged(**flags)


def render_json(data: dict) -> str:
    return json.dumps(data, indent=2)


def _load_spec(config: RunConfig):
    return parse_spec(read_text(config.spec_path))


def _echo_verdict(verdict: Verdict, config: RunConfig):
    if config.output == 'json':
        click.echo(verdict_json(verdict))
        return
    click.echo(f"=== Verdict: {verdict.outcome.value.upper()} ===")
    if verdict.realization is not None:
        click.echo("Realization:")
        click.echo(render(verdict.realization).rstrip())
    if verdict.witness is not None:
        witness = verdict.witness
        click.echo("Witness:")
        click.echo(f"  database: {witness.database}")
        click.echo(f"  tuple: ({', '.join(witness.answer)})")
        click.echo(f"  source answers: {sorted(witness.source_answers)}")
        click.echo(f"  certain answers: {sorted(witness.certain_answers)}")
    if verdict.bounds is not None:
        bounds = verdict.bounds
        click.echo(f"Strategy: {bounds.strategy} (exhaustive: {bounds.exhaustive}, "
                   f"candidates: {bounds.candidates_checked})")
        for note in bounds.notes:
            click.echo(f"Note: {note}")


@click.group(cls=ObdaGroup)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help="JSON file with default budgets (created if missing)")
@click.option('--verbose', '-v', is_flag=True, help="Log progress to stderr")
@click.option('--json', 'as_json', is_flag=True, help="Machine-readable output")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], verbose: bool, as_json: bool):
    """Expressibility and verification of queries under OBDA specifications"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    config = ConfigManager(config_file=Path(config_path)).load_run_config() if config_path else RunConfig()
    if as_json:
        config.output = 'json'
    ctx.obj = {'config': config}


@cli.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--source-query', 'source_query_path', type=click.Path(exists=True, dir_okay=False), default=None)
@budget_options
@click.pass_context
def check(ctx: click.Context, **flags):
    """Decide whether the source query has a realization"""
    config = _run_config(ctx, **flags)
    config.validate('spec_path', 'source_query_path')
    spec = _load_spec(config)
    q_s = parse_query(read_text(config.source_query_path), spec.source_schema)
    verdict = expressible(spec, q_s, config.to_budget(), consistent_only=config.consistent_only,
                          jobs=config.jobs)
    _echo_verdict(verdict, config)
    return verdict.exit_code


@cli.command(name='verify')
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--source-query', 'source_query_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--target-query', 'target_query_path', type=click.Path(exists=True, dir_okay=False), default=None)
@budget_options
@click.pass_context
def verify_command(ctx: click.Context, **flags):
    """Decide whether the target query is a realization of the source query"""
    config = _run_config(ctx, **flags)
    config.validate('spec_path', 'source_query_path', 'target_query_path')
    spec = _load_spec(config)
    q_s = parse_query(read_text(config.source_query_path), spec.source_schema)
    q_t = parse_query(read_text(config.target_query_path), spec.target_schema())
    if q_s.arity != q_t.arity:
        raise click.UsageError(f"source query has arity {q_s.arity}, target query has arity {q_t.arity}")
    verdict = verify(spec, q_s, q_t, config.to_budget(), consistent_only=config.consistent_only,
                     jobs=config.jobs)
    _echo_verdict(verdict, config)
    return verdict.exit_code


@cli.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--query', 'query_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help="Query over the target vocabulary")
@click.option('--max-abox', type=int, default=None,
              help="Largest disjunct in facts (default: |q| + |O| * |q|)")
@click.pass_context
def rewrite(ctx: click.Context, spec_path: str, query_path: str, max_abox: Optional[int]):
    """Print the canonical UCQ-rewriting of a query under a DL-Lite ontology"""
    config = _run_config(ctx, spec_path=spec_path, max_abox=max_abox)
    config.validate('spec_path')
    spec = _load_spec(config)
    schema = spec.target_schema()
    query = parse_query(read_text(query_path), schema)
    omq = OMQ(spec.ontology, schema, query)
    size_bound = config.max_abox
    if size_bound is None:
        size_bound = max(canonical_size_bound(spec.ontology, query), 1)
    rewriting = minimize_ucq(canonical_rewriting_dllite(omq, size_bound))
    if config.output == 'json':
        click.echo(render_json({'rewriting': [str(cq) for cq in rewriting], 'size_bound': size_bound}))
    else:
        click.echo(render(rewriting), nl=False)
    return 0


@cli.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--abox', 'abox_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--depth', type=int, default=0, show_default=True, help="Unraveling depth below the ABox")
@click.pass_context
def chase(ctx: click.Context, spec_path: str, abox_path: str, depth: int):
    """Saturate an ABox and print the universal model up to a depth"""
    config = _run_config(ctx, spec_path=spec_path)
    spec = _load_spec(config)
    abox = parse_database(read_text(abox_path), spec.target_schema())
    reasoner = Reasoner(spec.ontology)
    saturation = reasoner.saturate_abox(abox)
    model = reasoner.universal_model(abox, depth) if saturation.consistent else None
    if config.output == 'json':
        facts = [str(f) for f in model.sorted_facts()] if model is not None else []
        click.echo(render_json({'consistent': saturation.consistent, 'facts': facts}))
    elif model is None:
        click.echo("=== ABox is inconsistent with the ontology ===")
    else:
        click.echo("=== Universal model ===")
        click.echo(render(model), nl=False)
    return 0 if saturation.consistent else Outcome.NO.exit_code


@cli.command()
@click.option('--left', 'left_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--right', 'right_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.pass_context
def containment(ctx: click.Context, left_path: str, right_path: str):
    """Test whether the left UCQ is contained in the right UCQ"""
    left = parse_query(read_text(left_path))
    right = parse_query(read_text(right_path))
    if left.arity != right.arity:
        raise click.UsageError(f"queries have arities {left.arity} and {right.arity}")
    contained = ucq_contained(left, right)
    if ctx.obj['config'].output == 'json':
        click.echo(render_json({'contained': contained}))
    else:
        click.echo('true' if contained else 'false')
    return 0 if contained else Outcome.NO.exit_code


@cli.command(name='gen-qbf')
@click.option('--qbf', 'qbf_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--out-dir', type=click.Path(file_okay=False), default=None,
              help="Write instance.obda and query.uq here instead of stdout")
@click.option('--full-schema', is_flag=True, help="Generate every clause relation over the token universe")
@click.option('--evaluate', is_flag=True, help="Also report the truth value of the formula")
@click.pass_context
def gen_qbf(ctx: click.Context, qbf_path: str, out_dir: Optional[str], full_schema: bool, evaluate: bool):
    """Turn a forall-exists 3CNF formula into a hard expressibility instance"""
    phi = parse_qbf(read_text(qbf_path))
    spec, query = qbf_to_instance(phi, full_schema=full_schema)
    if out_dir:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        (target / 'instance.obda').write_text(render(spec), encoding='utf-8')
        (target / 'query.uq').write_text(render(query), encoding='utf-8')
        click.echo(f"Wrote {target / 'instance.obda'} and {target / 'query.uq'}")
    else:
        click.echo("=== Specification ===")
        click.echo(render(spec), nl=False)
        click.echo("=== Source query ===")
        click.echo(render(query), nl=False)
    if evaluate:
        click.echo(f"Formula is {'true' if qbf_brute_eval(phi) else 'false'}")
    return 0


@cli.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--source-query', 'source_query_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--target-query', 'target_query_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help="Candidate realization (default: the forward image of the source query)")
@click.option('--seed', type=int, default=None,
              help="Generate a random instance instead of reading one (default: seed from --config)")
@click.option('--profile', type=click.Choice(['tiny', 'rooted', 'unrooted']), default='tiny', show_default=True)
@click.option('--max-domain', 'oracle_max_domain', type=int, default=None)
@click.option('--max-facts', 'oracle_max_facts', type=int, default=None)
@click.option('--consistent-only/--all-databases', default=None)
@click.pass_context
def oracle(ctx: click.Context, profile: str, **flags):
    """Search small source databases for a counterexample to a realization"""
    config = _run_config(ctx, **flags)
    if config.seed is not None and not config.spec_path:
        spec, q_s = random_instance(config.seed, Profile.preset(profile))
        click.echo("=== Generated specification ===")
        click.echo(f"Seed: {config.seed}")
        click.echo(render(spec), nl=False)
        click.echo("=== Generated source query ===")
        click.echo(render(q_s), nl=False)
    else:
        config.validate('spec_path', 'source_query_path')
        spec = _load_spec(config)
        q_s = parse_query(read_text(config.source_query_path), spec.source_schema)
    config.validate()
    if config.target_query_path:
        q_t = parse_query(read_text(config.target_query_path), spec.target_schema())
    else:
        q_t = apply_forward_ucq(spec.mappings, q_s)
    max_domain = config.oracle_max_domain or default_max_domain(q_s)
    result = brute_force_realization_check(spec, q_s, q_t, max_domain, config.oracle_max_facts,
                                           consistent_only=config.consistent_only)
    if config.output == 'json':
        data = {'consistent': result.consistent, 'max_domain': result.max_domain,
                'max_facts': result.max_facts, 'databases_checked': result.databases_checked}
        if result.counterexample is not None:
            data['counterexample'] = result.counterexample.to_dict()
        click.echo(render_json(data))
    else:
        click.echo(f"=== Oracle: {result} ===")
        click.echo(f"Databases checked: {result.databases_checked}")
    return 0 if result.consistent else Outcome.NO.exit_code


def main():
    """Main application entry point"""
    try:
        cli()
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        sys.exit(INTERRUPT_EXIT)


if __name__ == '__main__':
    main()
