"""
Command line: factor operators, verify certificates, run exhaustive searches.

Exit codes: 0 success, 1 malformed input, 2 refusal (a necessary condition
fails or a pipeline cannot proceed), 3 verification failure, 4 budget exceeded.
"""
import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from invofactor import __version__
from invofactor.algebra import QuadPoly
from invofactor.constructions.scalar import scalar_triple_2x2
from invofactor.constructions.shift import MODEL_BLOCK, shift_pair
from invofactor.core.config import settings
from invofactor.core.errors import (
    BudgetExceeded,
    DerogatoryInput,
    FieldMismatch,
    InvofactorError,
    MalformedInput,
    NotSplit,
    ShapeMismatch,
    UnknownIndex,
    ZeroLambda,
)
from invofactor.core.normalization import PolyParser
from invofactor.glsearch import product_membership, stable_search_report
from invofactor.linalg import Mat
from invofactor.models import Flavor
from invofactor.modulestruct import build_strat_periodic, quotient_strata
from invofactor.opcore import BasisIndex, LinComb, RepAut, Window, check_annihilated, compose, cyclic_window_cert
from invofactor.schemas import RepAutSchema, dump_matrix, parse_matrix
from invofactor.services.census_service import CensusService
from invofactor.services.factorization_service import FactorizationService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_REFUSED = 2
EXIT_VERIFY_FAILED = 3
EXIT_BUDGET = 4

INPUT_ERRORS = (MalformedInput, DerogatoryInput, NotSplit, FieldMismatch, ShapeMismatch, UnknownIndex, ZeroLambda)


def _emit(payload: dict):
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def exit_codes(func):
    """Turns library errors into the stable exit codes, printing them as JSON."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValidationError, json.JSONDecodeError, OSError) as e:
            _emit({"error": "MalformedInput", "message": str(e)})
            return EXIT_MALFORMED
        except INPUT_ERRORS as e:
            _emit(e.to_dict())
            return EXIT_MALFORMED
        except BudgetExceeded as e:
            _emit(e.to_dict())
            return EXIT_BUDGET
        except InvofactorError as e:
            logger.warning(f"{func.__name__}: {e.code}: {e.message}")
            _emit(e.to_dict())
            return EXIT_REFUSED
    return wrapper


def load_operator(path: str, field_tag: Optional[str] = None) -> RepAut:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise MalformedInput("operator JSON must be an object")
    if field_tag:
        declared = data.setdefault("field", field_tag)
        if PolyParser.parse_field(declared) != PolyParser.parse_field(field_tag):
            raise MalformedInput(f"--field {field_tag} does not match the operator's field {declared}")
    if not data.get("field"):
        raise MalformedInput("missing field tag")
    return RepAutSchema.model_validate(data).to_domain()


def load_matrix(text: str, field_tag: str) -> Mat:
    path = Path(text)
    raw = path.read_text(encoding="utf-8") if path.exists() else text
    rows = json.loads(raw)
    if not isinstance(rows, list):
        raise MalformedInput("matrix must be a JSON list of rows")
    return parse_matrix(rows, PolyParser.parse_field(field_tag))


class ExitCodeGroup(click.Group):
    """Click group whose usage errors exit with 1 and whose commands return their exit code."""

    def main(self, args=None, prog_name=None, **extra):
        extra.pop("standalone_mode", None)
        try:
            rv = super().main(args, prog_name, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_MALFORMED)
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_MALFORMED)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


@click.command("factor", help="Factor an operator into three or four quadratic factors and write a certificate")
@click.option("--input", "-i", "input_path", required=True, help="Operator JSON file")
@click.option("--polys", "-p", required=True, help="Annihilators separated by ';', e.g. 't^2-1;t^2-1;t^2-1'")
@click.option("--field", "-f", "field_tag", default=None, help="Field tag (F5, GF(5), Q); must match the operator")
@click.option("--window", "-w", default=None, type=click.IntRange(1), help=f"Window radius, {settings.DEFAULT_WINDOW} by default")
@click.option("--out", "-o", default=None, help="Certificate path; printed to standard output when omitted")
@click.option("--seed", "-s", default=0, type=int, help="Pairing seed, 0 by default")
@click.option("--qmax", default=None, type=click.IntRange(0), help=f"Padding bound, {settings.QMAX} by default")
@click.option("--jobs", "-j", default=None, type=click.IntRange(1), help="Workers for window checks and searches")
@exit_codes
def invofactor_factor(input_path, polys, field_tag, window, out, seed, qmax, jobs):
    u = load_operator(input_path, field_tag)
    parsed = PolyParser.parse_poly_list(polys, u.field)
    service = FactorizationService(window=window, qmax=qmax, jobs=jobs)
    cert = service.factor(u, parsed, seed=seed)
    text = service.certificates.dumps(cert)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"Certificate for {len(parsed)} factors ({cert.provenance.get('pipeline')}) written to {out}")
    else:
        click.echo(text)
    click.echo(f"Window of {len(cert.window)} indices: {'passed' if cert.passed else 'FAILED'}", err=True)
    return EXIT_OK if cert.passed else EXIT_VERIFY_FAILED


@click.command("verify", help="Re-check a certificate's annihilations and product identity on a window")
@click.option("--cert", "-c", "cert_path", required=True, help="Certificate JSON file")
@click.option("--op", "op_path", default=None, help="Operator JSON file; the certificate's target by default")
@click.option("--window", "-w", default=None, type=click.IntRange(1), help="Window radius")
@click.option("--jobs", "-j", default=None, type=click.IntRange(1))
@exit_codes
def invofactor_verify(cert_path, op_path, window, jobs):
    service = FactorizationService(jobs=jobs)
    cert = service.certificates.load(cert_path)
    u = load_operator(op_path, cert.target.field.tag) if op_path else cert.target
    report = service.certificates.verify(u, cert, radius=window)
    _emit(report.to_dict())
    if not report.passed:
        click.echo(f"Verification failed: {report.first_failure}", err=True)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


@click.command("search", help="Exhaustive product membership in GL_n(F_q)")
@click.option("--n", "n", default=None, type=click.IntRange(1), help="Matrix size; read from the target when omitted")
@click.option("--q", "q", required=True, type=click.IntRange(2), help="Field size (prime)")
@click.option("--polys", "-p", required=True)
@click.option("--target", "-t", required=True, help="Matrix as JSON rows, or a file holding them")
@click.option("--lambda", "lam", default=None, help="Run the λ-stable search for target ⊕ λ·I_q instead")
@click.option("--qmax", default=None, type=click.IntRange(0))
@click.option("--budget", default=None, type=click.IntRange(1), help="Enumeration budget, INVOFACTOR_BUDGET by default")
@click.option("--jobs", "-j", default=None, type=click.IntRange(1))
@exit_codes
def invofactor_search(n, q, polys, target, lam, qmax, budget, jobs):
    tag = f"F{q}"
    T = load_matrix(target, tag)
    if n is not None and T.rows != n:
        raise MalformedInput(f"target is {T.rows}x{T.cols}, expected n={n}")
    parsed = PolyParser.parse_poly_list(polys, T.field)
    if lam is not None:
        report = stable_search_report(T, PolyParser.parse_scalar(lam, T.field), parsed, qmax=qmax, budget=budget, jobs=jobs)
        _emit(report.to_dict())
        return EXIT_OK
    _emit(product_membership(T, parsed, budget=budget, jobs=jobs).to_dict())
    return EXIT_OK


@click.command("census", help="Count all products of k elements annihilated by a polynomial in GL_n(F_q)")
@click.option("--n", "n", required=True, type=click.IntRange(1))
@click.option("--q", "q", required=True, type=click.IntRange(2))
@click.option("--k", "k", required=True, type=click.IntRange(1))
@click.option("--poly", default="t^2-1", help="Annihilator, t^2-1 by default")
@click.option("--out", "-o", default=None, help=f"Census file, under {settings.CENSUS_DIR}/ by default")
@click.option("--budget", default=None, type=click.IntRange(1))
@exit_codes
def invofactor_census(n, q, k, poly, out, budget):
    service = CensusService(budget=budget)
    result = service.run(n, q, k, poly)
    path = service.write(result, out)
    _emit(dict(result.header(), file=str(path)))
    return EXIT_OK


@click.command("acceptable", help="Whether λ is acceptable for three polynomials")
@click.option("--lambda", "lam", required=True)
@click.option("--field", "-f", "field_tag", required=True)
@click.option("--polys", "-p", required=True)
@exit_codes
def invofactor_acceptable(lam, field_tag, polys):
    fld = PolyParser.parse_field(field_tag)
    verdict = FactorizationService().acceptable(PolyParser.parse_scalar(lam, fld), PolyParser.parse_poly_list(polys, fld))
    _emit(verdict.to_dict())
    return EXIT_OK


@click.command("classify", help="Decide the three-factor classification for an operator")
@click.option("--input", "-i", "input_path", required=True)
@click.option("--flavor", required=True, type=click.Choice([f.value for f in Flavor]))
@exit_codes
def invofactor_classify(input_path, flavor):
    u = load_operator(input_path)
    _emit(FactorizationService().classify(u, Flavor(flavor)).to_dict())
    return EXIT_OK


@click.command("strata", help="Dump the stratification the pipelines would use")
@click.option("--input", "-i", "input_path", required=True)
@exit_codes
def invofactor_strata(input_path):
    u = load_operator(input_path)
    s = quotient_strata(u) if u.has_shift else build_strat_periodic(u)
    _emit(s.to_dict())
    return EXIT_OK


@click.command("demo", help="Reproduce the worked examples")
@exit_codes
def invofactor_demo():
    F5 = PolyParser.parse_field("F5")
    F7 = PolyParser.parse_field("F7")
    inv5 = QuadPoly.of(F5, 1, 0, -1)

    click.secho("Scalar triple for λ=2 over F5, three t^2-1", bold=True)
    A, B, C = scalar_triple_2x2(F5(2), inv5, inv5, inv5)
    for name, M in (("A", A), ("B", B), ("C", C)):
        click.echo(f"  {name} = {dump_matrix(M)}")
    click.echo(f"  ABC = {dump_matrix(A @ B @ C)}")

    click.secho("Shift pair for (t^2-1, t^2-1)", bold=True)
    a, b = shift_pair(inv5, inv5)
    slots = Window.of(BasisIndex(MODEL_BLOCK, k) for k in range(64))
    click.echo(f"  a annihilated on slots 0..63: {check_annihilated(a, inv5, slots).passed}")
    click.echo(f"  b annihilated on slots 0..63: {check_annihilated(b, inv5, slots).passed}")
    x1 = LinComb.basis(BasisIndex(MODEL_BLOCK, 1), F5)
    click.echo(f"  ab cyclic at depth 16: {cyclic_window_cert(compose([a, b]), x1, 16).independent}")

    click.secho("Censuses of four involutions", bold=True)
    service = CensusService()
    for q in (3, 5):
        result = service.run(2, q, 4, "t^2-1")
        click.echo(f"  GL_2(F{q}): {result.total} products, by determinant {result.header()['counts_by_det']}")

    click.secho("λ=3 over F7 with three involutions", bold=True)
    inv7 = QuadPoly.of(F7, 1, 0, -1)
    factorizer = FactorizationService()
    click.echo(f"  acceptable: {factorizer.acceptable(F7(3), [inv7] * 3).kind.value}")
    try:
        factorizer.factor(RepAut.scalar(F7, 3), [inv7] * 3)
        click.echo("  factor: unexpectedly succeeded")
    except InvofactorError as e:
        click.echo(f"  factor: {e.to_dict().get('reason', e.code)}")
    return EXIT_OK


@click.group(cls=ExitCodeGroup, help="Exact quadratic factorizations of automorphisms of countable-dimensional spaces")
@click.version_option(__version__)
@click.option("--log-level", default=settings.LOG_LEVEL, help=f"Logging level, {settings.LOG_LEVEL} by default")
def entry_point(log_level):
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(log_level.upper())


entry_point.add_command(invofactor_factor)
entry_point.add_command(invofactor_verify)
entry_point.add_command(invofactor_search)
entry_point.add_command(invofactor_census)
entry_point.add_command(invofactor_acceptable)
entry_point.add_command(invofactor_classify)
entry_point.add_command(invofactor_strata)
entry_point.add_command(invofactor_demo)


def main():
    entry_point()
