"""Command-line entry point: ``seccogc {codes,keys,privacy,simulate,train}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every output file is a deterministic function of the config and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import codes, keys, privacy
from . import rng as rngmod
from .config import ConfigError, ExperimentConfig, load as load_config
from .fltrain import (TrainingAborted, TrainingConfig, dirichlet_partition, load_csv, make_model,
                      synthetic_gaussian_mixture, train)
from .fltrain.training import LOG_COLUMNS
from .protocol import (H_SECCOGC, HFL_UNRELIABLE, IDEAL, PRIVATE_HFL, SCHEMES, EmptyRound,
                       MaxAttemptsExceeded, run_round_h_seccogc, run_round_hfl_unreliable,
                       run_round_ideal, run_round_private_hfl)

log = logging.getLogger("seccogc")

SIMULATE_COLUMNS = ("round", "scheme", "attempts", "delivered_fraction",
                    "update_error_vs_ideal", "residual_noise_norm", "status")
PRIVACY_COLUMNS = ("layer", "label", "j", "k", "epsilon", "delta", "prob_guarantee")


class UsageError(Exception):
    pass


def worker_count() -> int:
    raw = os.environ.get("SECCOGC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"SECCOGC_THREADS must be an integer, got {raw!r}") from None


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _csv(columns: Sequence[str], rows: List[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return _num(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "schemes", None):
        cfg.schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    from .config import validate
    validate(cfg)
    return cfg


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_codes(args) -> int:
    cfg = _load(args)
    K = cfg.coding.K if args.K is None else args.K
    s = cfg.coding.s if args.s is None else args.s
    arithmetic = args.arithmetic or cfg.coding.arithmetic
    if K < 1 or not 0 <= s <= K - 1:
        raise UsageError(f"need 0 <= s <= K-1, got K={K}, s={s}")
    scheme = codes.build_coding_scheme(K, s, arithmetic)
    path = Path(cfg.out) / f"scheme_K{K}_s{s}.json"
    _write(path, codes.dumps(scheme) + "\n")
    print(f"K={K} s={s} f={scheme.f} rows -> {path}")
    if args.verify:
        report = codes.verify_scheme(scheme)
        print(report)
        return 0 if report.ok else 1
    return 0


def cmd_keys(args) -> int:
    cfg = _load(args)
    K = cfg.coding.K if args.K is None else args.K
    lam = cfg.keys.lam if args.lam is None else args.lam
    if K < 2 or lam < 0:
        raise UsageError(f"need K >= 2 and lambda >= 0, got K={K}, lambda={lam}")
    schedule = keys.build_key_schedule(K, lam, cfg.keys.D)
    path = Path(cfg.out) / f"keys_K{K}.json"
    _write(path, keys.dumps(schedule) + "\n")
    print(f"K={K} lambda={lam} D={cfg.keys.D} m={schedule.m} -> {path}")
    if args.verify:
        problems = keys.check_schedule(schedule)
        sample = keys.sample_keys(schedule, rngmod.stream(cfg.seed, rngmod.KEYS, 0, 0)).keys
        worst = float(np.abs(sample.sum(axis=0)).max())
        if worst > 1e-10 * K * max(lam, 1e-300) and lam > 0:
            problems.append(("zero_sum", worst))
        for p in problems:
            print(f"FAIL {p[0]}: {p[1]}")
        if not problems:
            print(f"all invariants hold (max |sum of keys| = {worst:.3g})")
        return 0 if not problems else 1
    return 0


def _privacy_params(cfg: ExperimentConfig) -> privacy.PrivacyParams:
    p = cfg.privacy
    return privacy.PrivacyParams(zeta=p.zeta, lam=cfg.keys.lam, D=cfg.keys.D, delta0=p.delta0,
                                 delta1=p.delta1, delta2=p.delta2, delta3=p.delta3,
                                 delta6=p.delta6, delta7=p.delta7)


def cmd_privacy(args) -> int:
    cfg = _load(args)
    scheme = codes.build_coding_scheme(cfg.K, cfg.coding.s, cfg.coding.arithmetic)
    schedule = keys.build_key_schedule(cfg.K, cfg.keys.lam, cfg.keys.D)
    net = cfg.network_config()
    params = _privacy_params(cfg)
    report = privacy.full_report(params, scheme, schedule, net, delta_prime=cfg.privacy.delta_prime,
                                 method=cfg.privacy.radius_method, n_draws=cfg.privacy.mc_draws,
                                 seed=cfg.seed)
    rows = [{"layer": e.layer, "label": e.label, "j": "" if e.j is None else e.j,
             "k": "" if e.k is None else e.k, "epsilon": _num(e.epsilon),
             "delta": _num(e.delta), "prob_guarantee": _num(e.prob_guarantee)}
            for e in report.entries]
    out = Path(cfg.out)
    _write(out / "privacy_report.csv", _csv(PRIVACY_COLUMNS, rows))

    summary = {"leakage_nats": report.leakage_nats, "errors": report.errors, "worst": {}}
    for layer in ("client", "relay-identity", "relay-value"):
        e = report.worst(layer)
        summary["worst"][layer] = {"label": e.label, "j": e.j, "k": e.k, "epsilon": e.epsilon,
                                   "delta": e.delta, "prob_guarantee": e.prob_guarantee}
    for e in report.layer("server"):
        summary["worst"][f"server-{e.label}"] = {"epsilon": e.epsilon, "delta": e.delta,
                                                "prob_guarantee": e.prob_guarantee}
    summary["counts"] = {layer: len(report.layer(layer))
                         for layer in ("client", "relay-identity", "relay-value", "server")}
    _write(out / "privacy_summary.json", json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    print(f"{len(rows)} entries; leakage {report.leakage_nats:.6g} nats; "
          f"{len(report.errors)} radius errors")
    return 0


def _unit_deltas(seed: int, round: int, K: int, D: int) -> np.ndarray:
    d = rngmod.stream(seed, rngmod.DELTAS, round).standard_normal((K, D))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    rounds = cfg.simulate.rounds if args.rounds is None else args.rounds
    if rounds < 1:
        raise UsageError("--rounds must be positive")
    K, D = cfg.K, cfg.keys.D
    net = cfg.network_config()
    scheme = codes.build_coding_scheme(K, cfg.coding.s, cfg.coding.arithmetic)
    schedule = keys.build_key_schedule(K, cfg.keys.lam, D)
    rows, failures = [], 0
    for t in range(1, rounds + 1):
        deltas = _unit_deltas(cfg.seed, t, K, D)
        ideal = run_round_ideal(deltas)
        for name in cfg.schemes:
            row = {"round": t, "scheme": name, "attempts": 1, "delivered_fraction": "",
                   "update_error_vs_ideal": "", "residual_noise_norm": "", "status": "ok"}
            try:
                if name == IDEAL:
                    update, frac, noise = ideal, 1.0, 0.0
                elif name == H_SECCOGC:
                    out = run_round_h_seccogc(scheme, schedule, net, deltas, t, cfg.simulate.max_attempts)
                    update, frac, noise = out.global_update, 1.0, out.residual_key_norm
                    row["attempts"] = out.attempts
                elif name == HFL_UNRELIABLE:
                    res = run_round_hfl_unreliable(net, deltas, round=t)
                    update, frac, noise = res.update, res.mask.mean(), 0.0
                else:
                    res = run_round_private_hfl(net, deltas, schedule, round=t)
                    update, frac, noise = res.update, res.mask.mean(), np.linalg.norm(res.residual_noise)
            except MaxAttemptsExceeded as exc:
                failures += 1
                row.update(attempts=exc.attempts, delivered_fraction=_num(0.0),
                           status="max_attempts_exceeded")
                rows.append(row)
                continue
            except EmptyRound:
                row.update(delivered_fraction=_num(0.0), status="empty_round")
                rows.append(row)
                continue
            row.update(delivered_fraction=_num(frac),
                       update_error_vs_ideal=_num(np.linalg.norm(update - ideal)),
                       residual_noise_norm=_num(noise))
            rows.append(row)
    path = Path(cfg.out) / "simulate.csv"
    _write(path, _csv(SIMULATE_COLUMNS, rows))
    print(f"{rounds} rounds x {len(cfg.schemes)} schemes -> {path}; "
          f"{failures} rounds exceeded {cfg.simulate.max_attempts} attempts")
    return 0


def _datasets(cfg: ExperimentConfig):
    t = cfg.training
    if t.dataset == "synthetic":
        if not t.synthetic:
            raise UsageError("training.dataset is 'synthetic' but training.synthetic is false; "
                             "give a CSV path")
        return synthetic_gaussian_mixture(t.n_train, t.n_test, t.n_features, t.n_classes,
                                          t.separation, seed=cfg.seed)
    path = Path(t.dataset)
    if not path.is_file():
        raise UsageError(f"training.dataset: no such file {path}")
    full = load_csv(path)
    if t.test_dataset:
        test_path = Path(t.test_dataset)
        if not test_path.is_file():
            raise UsageError(f"training.test_dataset: no such file {test_path}")
        return full, load_csv(test_path, full.n_classes)
    # Hold out the last fifth of a shuffled copy.
    from .fltrain.data import Dataset
    perm = rngmod.stream(cfg.seed, rngmod.DATA).permutation(len(full))
    cut = len(full) * 4 // 5
    tr, te = perm[:cut], perm[cut:]
    return (Dataset(full.X[tr], full.y[tr], full.n_classes),
            Dataset(full.X[te], full.y[te], full.n_classes))


def cmd_train(args) -> int:
    cfg = _load(args)
    t = cfg.training
    train_set, test_set = _datasets(cfg)
    K = cfg.K
    partition = dirichlet_partition(train_set, K, t.gamma, seed=cfg.seed)
    model = make_model(t.model, train_set.n_features, train_set.n_classes, t.hidden)
    tcfg = TrainingConfig(rounds=t.rounds, local_iters=t.local_iters, lr=t.lr,
                          accumulation=t.accumulation, batch_size=t.batch_size, model=t.model,
                          hidden=t.hidden, seed=cfg.seed, max_attempts=t.max_attempts)
    net = cfg.network_config()
    coding = codes.build_coding_scheme(K, cfg.coding.s, cfg.coding.arithmetic) if H_SECCOGC in cfg.schemes else None
    lambdas = t.lambdas if t.lambdas else [cfg.keys.lam]

    jobs = []
    for name in cfg.schemes:
        if name in (H_SECCOGC, PRIVATE_HFL):
            for lam in lambdas:
                tag = name if len(lambdas) == 1 else f"{name}_lam{lam:g}"
                jobs.append((tag, name, lam))
        else:
            jobs.append((name, name, 0.0))

    def run(job):
        tag, name, lam = job
        schedule = keys.build_key_schedule(K, lam, model.dim)
        try:
            return tag, train(tcfg, partition, test_set, name, model, net, schedule, coding), None
        except TrainingAborted as exc:
            return tag, exc.log, exc

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(run, jobs))

    out = Path(cfg.out)
    combined, status = [], 0
    for tag, tlog, err in results:
        _write(out / f"train_{tag}.csv", tlog.to_csv())
        combined.extend(dict(r, run=tag) for r in tlog.rows)
        if err is not None:
            print(f"{tag}: {err}", file=sys.stderr)
            status = 1
        else:
            print(f"{tag}: final acc {tlog.final_acc:.4f}")
    fmt = [{k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in combined]
    _write(out / "train_combined.csv", _csv(("run",) + LOG_COLUMNS, fmt))
    return status


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seccogc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, schemes=False):
        p.add_argument("--config", help="JSON or TOML experiment config")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--out", help="output directory")
        if schemes:
            p.add_argument("--schemes", help=f"comma-separated subset of {','.join(SCHEMES)}")

    p = sub.add_parser("codes", help="build (and verify) a cyclic gradient code")
    common(p)
    p.add_argument("--K", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--arithmetic", choices=[codes.EXACT, codes.FLOAT])
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("keys", help="build (and verify) a zero-sum key schedule")
    common(p)
    p.add_argument("--K", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_keys)

    p = sub.add_parser("privacy", help="write the per-layer LDP report")
    common(p)
    p.set_defaults(func=cmd_privacy)

    p = sub.add_parser("simulate", help="Monte-Carlo rounds with synthetic unit updates")
    common(p, schemes=True)
    p.add_argument("--rounds", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="desk-scale training for each scheme")
    common(p, schemes=True)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"{parser.prog} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
