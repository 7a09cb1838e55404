"""Command-line entry points: key generation, the sensor commands, the
verification service, table export and the experiment harness."""

from __future__ import annotations

import os
import sys

import click

from . import ec_elgamal as eg
from . import evaluation as ev
from .protocol import SystemConfig
from .quantization import build_table, table_to_bytes
from .rng import SecureRng, SeededRng
from .sensor import (LockedOutError, SensorSession, SyntheticCapture,
                     UnknownUserError, read_feature_file)
from .service import serve as run_service
from .store import TemplateStore

EXIT_ACCEPT = 0
EXIT_REJECT = 1
EXIT_ERROR = 2
EXIT_UNKNOWN_USER = 3


def _rng():
    # Deterministic randomness is for tests only; never set in production.
    seed = os.environ.get("BIOMATCH_TEST_SEED")
    return SeededRng(int(seed)) if seed else SecureRng()


def _load_config(path: str) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as f:
        return SystemConfig.from_json(f.read())


def _parse_address(addr: str):
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


@click.group()
def main() -> None:
    """Privacy-preserving biometric verification toolkit."""


@main.command()
@click.option("--curve", default=eg.DEFAULT_CURVE,
              type=click.Choice(sorted(eg.CURVES)), show_default=True)
@click.option("--out-dir", default=".", show_default=True,
              help="Directory for public.key, service.key and sensor.key.")
def keygen(curve: str, out_dir: str) -> None:
    """Generate a key pair with the secret split in two shares."""
    params = eg.get_params(curve)
    km = eg.keygen(params, _rng())
    os.makedirs(out_dir, exist_ok=True)
    eg.save_key_file(os.path.join(out_dir, "public.key"), eg.ROLE_PUBLIC, params, km.h)
    eg.save_key_file(os.path.join(out_dir, "service.key"), eg.ROLE_SERVICE, params,
                     km.h, km.a1)
    eg.save_key_file(os.path.join(out_dir, "sensor.key"), eg.ROLE_SENSOR, params,
                     km.h, km.a2)
    click.echo(f"wrote public.key, service.key, sensor.key to {out_dir}")


@main.command("config")
@click.option("--k", type=int, required=True)
@click.option("--b", type=int, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--rho", required=True,
              help="Comma-separated between-user variances, one per feature.")
@click.option("--threshold", type=int, required=True)
@click.option("--curve", default=eg.DEFAULT_CURVE,
              type=click.Choice(sorted(eg.CURVES)), show_default=True)
@click.option("--out", "-o", default="config.json", show_default=True)
def make_config(k: int, b: int, delta: float, rho: str, threshold: int,
                curve: str, out: str) -> None:
    """Write a system config, deriving the score domain from the tables."""
    rho_vec = [float(v) for v in rho.split(",")]
    cfg = SystemConfig.create(k, b, delta, rho_vec, threshold, curve)
    with open(out, "w", encoding="utf-8") as f:
        f.write(cfg.to_json() + "\n")
    click.echo(f"score domain [{cfg.score_min}, {cfg.score_max}], alpha = {cfg.alpha}")


@main.command()
@click.option("--config", "config_path", required=True)
@click.option("--keyshare-file", required=True, help="Sensor key share file.")
@click.option("--service", "address", default="127.0.0.1:7700", show_default=True)
@click.option("--user", "-u", required=True)
@click.option("--features", "features_path", default=None,
              help="Feature file; first vector is used. Default: synthetic capture.")
@click.option("--seed", type=int, default=None, help="Seed for synthetic capture.")
def enroll(config_path, keyshare_file, address, user, features_path, seed) -> None:
    """Enroll a user: build and upload the encrypted template."""
    cfg = _load_config(config_path)
    session = SensorSession.from_key_file(cfg, keyshare_file,
                                          _parse_address(address), rng=_rng())
    feats = _capture(cfg, user, features_path, seed)
    try:
        session.enroll_user(user, feats)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"enrolled {user}")


@main.command()
@click.option("--config", "config_path", required=True)
@click.option("--keyshare-file", required=True, help="Sensor key share file.")
@click.option("--service", "address", default="127.0.0.1:7700", show_default=True)
@click.option("--user", "-u", required=True)
@click.option("--features", "features_path", default=None)
@click.option("--seed", type=int, default=None)
def verify(config_path, keyshare_file, address, user, features_path, seed) -> None:
    """Verify an identity claim; exit 0 on accept, 1 on reject, 3 unknown user."""
    cfg = _load_config(config_path)
    session = SensorSession.from_key_file(cfg, keyshare_file,
                                          _parse_address(address), rng=_rng())
    feats = _capture(cfg, user, features_path, seed)
    try:
        accepted = session.verify_user(user, feats)
    except UnknownUserError:
        click.echo("unknown user", err=True)
        sys.exit(EXIT_UNKNOWN_USER)
    except (LockedOutError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo("accept" if accepted else "reject")
    sys.exit(EXIT_ACCEPT if accepted else EXIT_REJECT)


def _capture(cfg: SystemConfig, user: str, features_path, seed):
    if features_path is not None:
        return read_feature_file(features_path)[0]
    cap = SyntheticCapture(cfg, seed if seed is not None else 0)
    return cap.capture(user)


@main.command()
@click.option("--listen", default="127.0.0.1:7700", show_default=True)
@click.option("--db-dir", default="./templates", show_default=True)
@click.option("--config", "config_path", required=True)
@click.option("--keyshare-file", required=True, help="Service key share file.")
@click.option("--lockout-n", type=int, default=0, show_default=True,
              help="Lock a user after this many verification attempts (0 = off).")
def serve(listen, db_dir, config_path, keyshare_file, lockout_n) -> None:
    """Run the verification service until interrupted."""
    try:
        cfg = _load_config(config_path)
    except (OSError, ValueError, KeyError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        run_service(cfg, keyshare_file, db_dir, _parse_address(listen), lockout_n)
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


@main.command()
@click.option("--b", type=int, required=True)
@click.option("--rho", type=float, required=True)
@click.option("--delta", type=float, required=True)
@click.option("--out", "-o", required=True, help="Output table blob path.")
def tables(b, rho, delta, out) -> None:
    """Precompute one lookup table and export it as a binary blob."""
    blob = table_to_bytes(build_table(b, rho, delta))
    with open(out, "wb") as f:
        f.write(blob)
    click.echo(f"wrote {len(blob)} bytes to {out}")


@main.command()
@click.option("--feature-set", default="fs1",
              type=click.Choice(sorted(ev.FEATURE_SETS)), show_default=True)
@click.option("--users", type=int, default=200, show_default=True)
@click.option("--captures", type=int, default=10, show_default=True)
@click.option("--impostors", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, required=True,
              help="Mandatory so runs are reproducible byte-for-byte.")
@click.option("--b", type=int, default=None, help="Omit for the continuous comparator.")
@click.option("--delta", type=float, default=None)
@click.option("--out", "-o", default="-", show_default=True)
def roc(feature_set, users, captures, impostors, seed, b, delta, out) -> None:
    """Accuracy experiment: write a (threshold, FAR, GAR) CSV and print EER."""
    fs = ev.FEATURE_SETS[feature_set]
    pop = ev.gen_population(fs, users, captures, seed)
    trials = ev.score_trials(fs, pop, impostors, seed + 1, b=b, delta=delta)
    csv = ev.roc_csv(trials)
    if out == "-":
        click.echo(csv, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(csv)
    eer_val, t_star = ev.eer(trials)
    click.echo(f"EER {eer_val * 100:.4f}% at threshold {t_star:.3f}", err=True)


@main.command()
@click.option("--alphas", default="10,20,30,40,50,60,80", show_default=True)
@click.option("--curve", default=eg.PAPER_PARITY_CURVE,
              type=click.Choice(sorted(eg.CURVES)), show_default=True,
              help="Default matches the curve class the timing model targets.")
@click.option("--reps", type=int, default=20, show_default=True)
@click.option("--kernels", is_flag=True,
              help="Benchmark the numba vs pure-numpy scoring kernels instead.")
@click.option("--out", "-o", default="-", show_default=True)
def bench(alphas, curve, reps, kernels, out) -> None:
    """Timing experiments: compare-set cost per alpha, or scoring kernels."""
    if kernels:
        res = ev.bench_kernels()
        for key, val in res.items():
            click.echo(f"{key}: {val}")
        return
    alpha_list = [int(a) for a in alphas.split(",")]
    results = ev.bench_alpha(alpha_list, curve=curve, reps=reps)
    csv = ev.bench_alpha_csv(results)
    if out == "-":
        click.echo(csv, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(csv)
    click.echo(f"linear fit R^2 = {ev.linear_fit_r2(results):.5f}", err=True)


if __name__ == "__main__":
    main()
