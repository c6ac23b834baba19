"""
Command-line entry point.

``qsec <group> <action> [flags]``. Every command has a flag schema; a
``--config`` file of ``key = value`` lines supplies the same keys and
explicit flags win. Output files carry a header with the package version,
the seed and a hash of the resolved command spec, and are written
atomically. Exit codes: 0 success, 2 validation error, 3 failed
verification.
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("qsec")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 2, 3
SIG_DIGITS = 12


class ValidationError(ValueError):
    pass


class VerificationFailed(RuntimeError):
    def __init__(self, result):
        super().__init__("verification failed")
        self.result = result


# ------------------------------------------------------------- serialization


def _round_float(x):
    if not math.isfinite(x):
        return str(x)
    return float(f"{x:.{SIG_DIGITS}g}")


def to_jsonable(obj):
    """Plain JSON types; floats rounded to 12 significant digits, complex as ``{re, im}``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round_float(obj.real), "im": _round_float(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def format_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row[c]
            if isinstance(v, (list, tuple, np.ndarray)):
                v = ";".join(f"{float(x):.{SIG_DIGITS}g}" for x in v)
            elif isinstance(v, (float, np.floating)):
                v = f"{float(v):.{SIG_DIGITS}g}"
            out.append(v)
        w.writerow(out)
    return buf.getvalue()


def atomic_write(path, text):
    path = Path(path)
    if not path.parent.exists():
        raise ValidationError(f"output directory {path.parent} does not exist")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def version_string():
    """``v<version>-g<short commit>`` when the source sits in a git checkout."""
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"v{__version__}-g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


NOT_HASHED = ("out", "format", "threads")


def spec_hash(command, params):
    """Hash of the command and every parameter that affects the result."""
    kept = {k: v for k, v in params.items() if k not in NOT_HASHED}
    blob = json.dumps(to_jsonable({"command": command, "params": kept}), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header(command, params):
    return {"version": version_string(), "seed": params.get("seed"), "spec_hash": spec_hash(command, params),
            "command": command}


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment; keys use ``-`` or ``_``."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# ------------------------------------------------------------- schemas


def _int_list(s):
    if isinstance(s, list):
        return [int(x) for x in s]
    return [int(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


def _float_list(s):
    if isinstance(s, list):
        return [float(x) for x in s]
    return [float(x) for x in str(s).replace(";", ",").split(",") if x.strip()]


def _choice(*values):
    def conv(s):
        if s not in values:
            raise ValueError(f"expected one of {', '.join(values)}")
        return s
    conv.__name__ = "choice"
    return conv


COMMON = {
    "seed": (int, 0),
    "trials": (int, None),
    "out": (str, None),
    "format": (_choice("json", "csv"), "json"),
    "threads": (int, 1),
}

SCHEMAS = {
    "mub.gen": {"d": (int, None)},
    "mub.verify": {"d": (_int_list, [2, 3, 4, 5, 7, 8, 9, 16, 25, 27]), "input": (str, None)},
    "qotp.check": {"set": (str, None), "pauli": (int, 1)},
    "bounds.verify": {"trials": (int, 200)},
    "bb84.run": {
        "n": (int, 64), "p_allowed": (float, 0.05), "eps_rel": (float, 0.005), "eps_sec": (float, 0.005),
        "attack": (_choice("none", "intercept_resend", "swap", "half_swap", "noise"), "none"),
        "noise": (float, 0.0), "trials": (int, 100),
    },
    "bb84.sweep": {
        "n": (int, 64), "p_values": (_float_list, [0.01, 0.02, 0.03, 0.04, 0.05]), "eps_rel": (float, 0.005),
        "eps_sec": (float, 0.005), "attack": (_choice("none", "intercept_resend", "swap", "half_swap", "noise"),
                                              "noise"),
        "noise": (float, 0.04), "trials": (int, 100), "format": (_choice("json", "csv"), "csv"),
    },
    "codes.threshold": {"p_a": (float, 0.05), "eps_rel": (float, 0.005), "eps_sec": (float, 0.005),
                        "n": (int, 1000), "steps": (int, 50)},
    "anonring.run": {
        "n_users": (int, 5), "alpha": (float, 1.0), "gamma": (float, 1.0), "rounds": (int, 1000),
        "code_n": (int, 7), "link_noise_z": (float, 0.0), "link_noise_x": (float, 0.0),
        "sessions": (int, 200),
    },
    "verify.all": {"trials": (int, 20)},
}

REQUIRED = {"mub.gen": ["d"]}


def resolve_params(command, explicit, config):
    schema = {**COMMON, **SCHEMAS[command]}
    params = {}
    for key, (conv, default) in schema.items():
        raw = explicit.get(key, config.get(key, default))
        if raw is None:
            params[key] = None
            continue
        try:
            params[key] = conv(raw) if key in explicit or key in config else raw
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"--{key.replace('_', '-')}: {exc}") from exc
    unknown = set(config) - set(schema) - {"config"}
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in REQUIRED.get(command, []):
        if params[key] is None:
            raise ValidationError(f"--{key} is required")
    if not 0 <= params["seed"] < 2 ** 64:
        raise ValidationError("--seed must fit in 64 bits")
    if params["threads"] < 1:
        raise ValidationError("--threads must be positive")
    if params.get("trials") is not None and params["trials"] < 1:
        raise ValidationError("--trials must be positive")
    return params


def build_parser():
    p = argparse.ArgumentParser(prog="qsec", description="Desk-scale quantum cryptography experiments.")
    groups = p.add_subparsers(dest="group", required=True)
    sub = {}
    for command in SCHEMAS:
        group, action = command.split(".")
        if group not in sub:
            sub[group] = groups.add_parser(group).add_subparsers(dest="action", required=True)
        ap = sub[group].add_parser(action, argument_default=argparse.SUPPRESS)
        ap.add_argument("--config")
        for key, (conv, default) in {**COMMON, **SCHEMAS[command]}.items():
            ap.add_argument(f"--{key.replace('_', '-')}", dest=key, type=conv,
                            help=None if default is None else f"default: {default}")
    return p


# ------------------------------------------------------------- commands


def _rng_seed(params):
    return params["seed"]


def cmd_mub_gen(params):
    from .mub import mub, verify_mub

    d = params["d"]
    try:
        fam = mub(d)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    ver = verify_mub(fam)
    if not ver["passed"]:
        raise VerificationFailed({"d": d, "verify": ver})
    return {"d": d, "n_bases": len(fam), "verify": ver, "family": fam.to_json()}


def cmd_mub_verify(params):
    from .mub import MubFamily, mub, verify_mub

    rows = []
    if params["input"]:
        try:
            obj = json.loads(Path(params["input"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read {params['input']}: {exc}") from exc
        try:
            fam = MubFamily.from_json(obj.get("family", obj))
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{params['input']} is not a MUB family: {exc}") from exc
        rows.append({"d": fam.d, "n_bases": len(fam), **verify_mub(fam)})
    else:
        for d in params["d"]:
            t = time.perf_counter()
            fam = mub(d)
            rows.append({"d": d, "n_bases": len(fam), **verify_mub(fam),
                         "complete": len(fam) == d + 1, "_seconds": time.perf_counter() - t})
    for r in rows:
        log.info("mub d=%d defect=%.3g", r["d"], r["max_unbiasedness_defect"])
        r.pop("_seconds", None)
    res = {"families": rows, "passed": all(r["passed"] for r in rows)}
    if not res["passed"]:
        raise VerificationFailed(res)
    return res


def cmd_qotp_check(params):
    from .qotp import EncryptionSet, gram_analysis, is_secure, pauli_pad

    if params["set"]:
        try:
            es = EncryptionSet.from_json(json.loads(Path(params["set"]).read_text()))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"cannot read {params['set']}: {exc}") from exc
    else:
        es = pauli_pad(params["pauli"])
    sec = is_secure(es)
    out = {"n": es.n, "M": len(es), "secure": sec}
    if sec["passed"]:
        out["gram"] = gram_analysis(es)
    return out


def bounds_suite(seed, trials):
    """Two-state and many-state bounds against the oracle on random qubit sources."""
    from .infobounds import QuantumSource, accessible_info_oracle, bound_many, bound_one_bit
    from .qlinalg import random_density

    rng = np.random.default_rng(seed)
    worst = {"two-state bound": -np.inf, "two-state corollary": -np.inf,
             "many-state bound": -np.inf, "many-state corollary": -np.inf}
    for t in range(trials):
        if t % 2 == 0:
            p0 = rng.uniform(0.5, 1.0)
            src = QuantumSource([p0, 1 - p0], [random_density(2, rng) for _ in range(2)])
            w = accessible_info_oracle(src, grid=(91, 181))
            b = bound_one_bit(src)
            worst["two-state bound"] = max(worst["two-state bound"], w - b["lemma"])
            worst["two-state corollary"] = max(worst["two-state corollary"], w - b["corollary"])
        else:
            k = int(rng.integers(2, 5))
            src = QuantumSource(np.full(k, 1.0 / k), [random_density(2, rng) for _ in range(k)])
            w = accessible_info_oracle(src, grid=(91, 181))
            b = bound_many(src)
            worst["many-state bound"] = max(worst["many-state bound"], w - b["lemma"])
            worst["many-state corollary"] = max(worst["many-state corollary"], w - b["corollary"])
    return [_record(name, "accessible information vs trace-norm bound", gap, 1e-6, "oracle - bound")
            for name, gap in worst.items()]


def _record(name, topic, lhs, rhs, what=""):
    lhs, rhs = float(lhs), float(rhs)
    return {"name": name, "topic": topic, "lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "pass": lhs <= rhs,
            "lhs_meaning": what}


def cmd_bounds_verify(params):
    recs = bounds_suite(_rng_seed(params), params["trials"])
    res = {"records": recs, "passed": all(r["pass"] for r in recs)}
    if not res["passed"]:
        raise VerificationFailed(res)
    return res


def _bb84_attack(params):
    from .bb84 import Attack

    kind = params["attack"]
    if kind == "noise":
        return Attack("none", noise=params["noise"])
    return Attack(kind, noise=params["noise"])


def cmd_bb84_run(params):
    from .bb84 import ProtocolConfig, run_trials

    try:
        cfg = ProtocolConfig(params["n"], params["p_allowed"], params["eps_rel"], params["eps_sec"])
        attack = _bb84_attack(params)
        sch = cfg.resolved_scheme()
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    res = run_trials(cfg, attack, params["trials"], _rng_seed(params))
    rounds = res.pop("rounds")
    return {"summary": res, "scheme": {"n": sch.n, "r": sch.r, "m": sch.m, "blocks": sch.sizes,
                                       "ecc_distance": sch.ecc_distance(), "pa_distance": sch.pa_distance()},
            "rounds": [{"passed": t.passed, "info_errors": t.info_errors, "test_errors": int(t.c_T.sum()),
                        "keys_match": t.keys_match} for t in rounds]}


def cmd_bb84_sweep(params):
    from .bb84 import ProtocolConfig, sweep

    try:
        cfg = ProtocolConfig(params["n"], params["p_values"][0], params["eps_rel"], params["eps_sec"])
        attack = _bb84_attack(params)
        rows = sweep(cfg, attack, params["p_values"], params["trials"], _rng_seed(params))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    return {"rows": rows}


SWEEP_COLUMNS = ["p_allowed", "pass_rate", "key_rate", "mismatch_rate", "bound_lhs", "bound_rhs"]
RING_COLUMNS = ["p_use_hat", "per_channel_test_freq", "decode_success_rate", "anonymity_estimate"]


def cmd_codes_threshold(params):
    from .lincode import rate_region, secret_rate_limit, threshold_solve

    p_star = threshold_solve()
    pts = rate_region(params["p_a"], params["eps_rel"], params["eps_sec"], params["n"], params["steps"])
    best = max(pts, key=lambda t: t[1], default=None)
    return {"p_star": p_star, "p_a": params["p_a"], "asymptotic_rate": secret_rate_limit(params["p_a"]),
            "region_points": len(pts), "max_m_over_n": None if best is None else best[1],
            "region": [list(t) for t in pts]}


def _ring_pair(n):
    from .lincode import BinaryLinearCode, NestedCodePair, hamming_code

    if n != 7:
        raise ValidationError("--code-n supports the [7,4] Hamming code only")
    return NestedCodePair(hamming_code(), BinaryLinearCode(np.ones((1, 7), dtype=np.uint8)))


def cmd_anonring_run(params):
    from . import anonring as ar

    try:
        pair = _ring_pair(params["code_n"])
        cfg = ar.RingConfig(params["n_users"], params["alpha"], params["gamma"], pair,
                            params["link_noise_z"], params["link_noise_x"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    seed = _rng_seed(params)
    ss = np.random.SeedSequence(seed)
    s_rounds, s_stats, s_sess, s_anon = ss.spawn(4)
    rng = np.random.default_rng(s_rounds)
    rounds, parity_ok = [], 0
    for _ in range(params["rounds"]):
        rec = ar.run_round(cfg, rng)
        entry = {"disposition": rec.disposition, "testers": rec.testers}
        if rec.disposition == "info":
            ok = int(np.bitwise_xor.reduce(rec.key_bits)) == int(np.bitwise_xor.reduce(rec.link_z))
            parity_ok += ok
            entry["key_parity_matches_errors"] = ok
        else:
            entry["arcs"] = ar.arc_parities(rec)
        rounds.append(entry)
    stats = ar.test_statistics(cfg, max(params["rounds"], 1000), s_stats)
    rng = np.random.default_rng(s_sess)
    ok = 0
    for _ in range(params["sessions"]):
        speaker = int(rng.integers(cfg.N))
        msg = rng.integers(0, 2, pair.message_bits, dtype=np.uint8)
        msg[0] = 1
        keys = ar.synthetic_keys(cfg.N, pair.c1.n, rng)
        res = ar.broadcast_session(cfg, [msg if i == speaker else None for i in range(cfg.N)], keys, rng)
        ok += bool(np.array_equal(res.output, msg))
    anon = ar.anonymity_metric(cfg, "announcements", params["sessions"], s_anon)
    info = sum(r["disposition"] == "info" for r in rounds)
    summary = {
        "p_use_hat": stats["p_use_hat"],
        "p_use": stats["p_use"],
        "per_channel_test_freq": stats["channel_freq"],
        "per_channel_test_expected": stats["channel_expected"],
        "decode_success_rate": ok / params["sessions"],
        "anonymity_estimate": anon["estimate"],
        "info_rounds": info,
        "parity_identity_holds": parity_ok == info,
    }
    return {"summary": summary, "rounds": rounds}


COMMANDS = {
    "mub.gen": cmd_mub_gen,
    "mub.verify": cmd_mub_verify,
    "qotp.check": cmd_qotp_check,
    "bounds.verify": cmd_bounds_verify,
    "bb84.run": cmd_bb84_run,
    "bb84.sweep": cmd_bb84_sweep,
    "codes.threshold": cmd_codes_threshold,
    "anonring.run": cmd_anonring_run,
}


# ------------------------------------------------------------- verify_all


def verify_all(seed=0, trials=20):
    """
    Run every module's inequality checks at desk scale.

    Returns ``{records, passed}``; each record is
    ``{name, topic, lhs, rhs, margin, pass}`` with the check ``lhs <= rhs``.
    """
    from . import anonring as ar
    from . import bb84
    from .infobounds import info_vs_disturbance, random_attack
    from .lincode import PaScheme, threshold_solve
    from .mub import mub, verify_mub
    from .qlinalg import random_density, random_unitary
    from .qotp import EncryptionSet, conjugated_basis_set, encrypt_average, is_secure

    ss = np.random.SeedSequence(seed)
    seeds = iter(ss.spawn(8))
    recs = []

    recs += bounds_suite(next(seeds), max(trials, 4))

    rng = np.random.default_rng(next(seeds))
    gap, norm_defect = -np.inf, 0.0
    for _ in range(trials):
        att = random_attack(1, 2, rng)
        r = info_vs_disturbance(att, grid=(91, 181))
        gap = max(gap, r["oracle_info"] - r["bound"])
    recs.append(_record("Thm 2.4.1", "information gained vs disturbance", gap, 0.0, "oracle - 4n sqrt(P_ebar)"))

    rng = np.random.default_rng(next(seeds))
    worst = 0.0
    for _ in range(max(trials // 4, 2)):
        att = bb84.symmetrize(random_attack(2, 2, rng))
        s = np.array([0, 1], dtype=np.uint8)
        b = rng.integers(0, 2, 2).astype(np.uint8)
        chk = bb84.conjugate_error_check(att, np.array([0], np.uint8), np.array([0], np.uint8), b, s)
        worst = max(worst, chk["max_defect"], chk["marginal_defect"])
    recs.append(_record("Lemma 3.3.1", "conjugate-basis error distribution", worst, 1e-9, "max defect"))

    rng = np.random.default_rng(next(seeds))
    chain, checked = -np.inf, 0
    scheme = PaScheme(np.array([[1, 0]], np.uint8), np.array([[1, 1]], np.uint8))
    for _ in range(max(trials // 4, 2)):
        att = bb84.symmetrize(random_attack(4, 2, rng))
        s = np.array([0, 0, 1, 1], dtype=np.uint8)
        b = rng.integers(0, 2, 4).astype(np.uint8)
        E, p = bb84.context_components(att, b, s, np.zeros(2, np.uint8), np.zeros(2, np.uint8))
        if np.min(p) < 1e-9:
            continue
        ctx = bb84.sd_context(E, scheme, oracle=True)
        for rec in ctx["records"]:
            o = rec["oracle_info"] if rec["oracle_info"] is not None else 0.0
            chain = max(chain, o - rec["half_trace_norm"], rec["half_trace_norm"] - rec["tight"],
                        rec["tight"] - rec["loose"])
            checked += 1
    if not checked:
        chain = np.inf
    recs.append(_record("SD chain", "oracle <= half trace norm <= tight <= loose", chain, 1e-9, "worst step"))

    h = bb84.hoeffding_check(200, 0.05, 0.1, 10000, next(seeds))
    recs.append(_record("Hoeffding", "sampling estimate", h["empirical_h"], h["bound"] + 3 * h["sigma"],
                        "empirical h"))

    rng = np.random.default_rng(next(seeds))
    disagree = 0
    for t in range(trials):
        n = 1
        if t % 2 == 0:
            es = conjugated_basis_set(random_unitary(2, rng), n)
        else:
            k = int(rng.integers(2, 4))
            es = EncryptionSet(n, np.full(k, 1.0 / k), [random_unitary(2, rng) for _ in range(k)])
        discrete = is_secure(es)["passed"]
        averaging = all(np.abs(encrypt_average(rho, es) - np.eye(2) / 2).max() < 1e-10
                        for rho in (random_density(2, rng) for _ in range(5)))
        disagree += discrete != averaging
    recs.append(_record("Eq 4.4", "discrete pad check vs state averaging", disagree, 0, "disagreements"))

    defect = 0.0
    for d in (4, 8, 9):
        fam = mub(d)
        v = verify_mub(fam)
        defect = max(defect, v["max_unbiasedness_defect"], 0.0 if len(fam) == d + 1 else 1.0)
    recs.append(_record("Thm 5.4.2", "prime-power MUB construction", defect, 1e-9, "max defect"))

    p_star = threshold_solve()
    recs.append(_record("threshold", "secret-key rate root", abs(p_star - 0.0756), 5e-4, "|p* - 0.0756|"))

    rng = np.random.default_rng(next(seeds))
    gap, decomp = -np.inf, -np.inf
    for _ in range(max(trials // 4, 2)):
        r = ar.two_sided_bound(ar.random_two_sided(1, 2, rng), [0, 1], grid=(91, 181))
        gap = max(gap, r["oracle"] - r["bound"])
        decomp = max(decomp, r["decomposed"] - r["bound"])
    recs.append(_record("Thm 6.5.1", "two-sided attack bound", gap, 1e-9, "oracle - bound"))
    recs.append(_record("Thm 6.5.1 decomposition", "two-term constant vs F_min form", decomp, 1e-12,
                        "decomposed - F_min form"))

    cfg = ar.RingConfig(6, 1.0, link_noise_z=0.2)
    rng = np.random.default_rng(next(seeds))
    bad = 0
    for _ in range(10 * trials):
        rec = ar.run_round(cfg, rng, testers=[])
        bad += int(np.bitwise_xor.reduce(rec.key_bits)) != int(np.bitwise_xor.reduce(rec.link_z))
    recs.append(_record("ring parity", "key parity equals link error parity", bad, 0, "violations"))

    return {"records": recs, "passed": all(r["pass"] for r in recs)}


def cmd_verify_all(params):
    res = verify_all(_rng_seed(params), params["trials"])
    if not res["passed"]:
        raise VerificationFailed(res)
    return res


COMMANDS["verify.all"] = cmd_verify_all


# ------------------------------------------------------------- dispatch


def _csv_for(command, result):
    if command == "bb84.sweep":
        return format_csv(result["rows"], SWEEP_COLUMNS)
    if command == "anonring.run":
        return format_csv([result["summary"]], RING_COLUMNS)
    raise ValidationError(f"{command} has no CSV form")


def _emit(command, params, result):
    doc = {"header": header(command, params), "result": result}
    fmt = params["format"]
    if fmt == "csv":
        h = doc["header"]
        text = "".join(f"# {k}: {h[k]}\n" for k in sorted(h)) + _csv_for(command, result)
    else:
        text = dumps(doc)
    if params["out"]:
        atomic_write(params["out"], text)
        if command == "anonring.run" and fmt == "json":
            csv_path = Path(params["out"]).with_suffix(".csv")
            h = doc["header"]
            atomic_write(csv_path, "".join(f"# {k}: {h[k]}\n" for k in sorted(h)) + _csv_for(command, result))
    else:
        sys.stdout.write(text)


def _set_threads(n):
    # modules are imported lazily by the commands, so this takes effect
    for var in ("NUMBA_NUM_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
        os.environ[var] = str(n)


def parse_and_dispatch(argv=None):
    """Run one command; returns the process exit code."""
    logging.basicConfig(level=os.environ.get("QSEC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    command = f"{ns.group}.{ns.action}"
    explicit = {k: v for k, v in vars(ns).items() if k not in ("group", "action", "config")}
    params = None
    try:
        config = read_config(ns.config) if getattr(ns, "config", None) else {}
        params = resolve_params(command, explicit, config)
        _set_threads(params["threads"])
        log.info("running %s with seed %s", command, params["seed"])
        result = COMMANDS[command](params)
        _emit(command, params, result)
        return EXIT_OK
    except ValidationError as exc:
        print(f"qsec: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VerificationFailed as exc:
        if params is not None:
            try:
                _emit(command, params, {**exc.result, "passed": False})
            except ValidationError:
                pass
        print("qsec: verification failed", file=sys.stderr)
        return EXIT_VERIFY


def main(argv=None):
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
