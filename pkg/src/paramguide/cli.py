"""Command-line entry point: ``paramguide <subcommand> ...``.

Every subcommand writes its data files plus a ``manifest.json`` in the same
directory. Exit codes: 0 success, 2 configuration or parameter error,
3 numerical accuracy failure, 1 anything else.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, correlations, fock_ivp, quantized_pump, spectral_solver, verification
from .errors import AccuracyError, ConfigError, ParamGuideError
from .model import THZ, bundled_config_path, load_config, total_spdc_bandwidth

EXIT_CONFIG = 2
EXIT_ACCURACY = 3
DEFAULT_CONFIG = "paper_device.json"


def fmt(x: float) -> str:
    """Fixed 17-significant-digit scientific notation."""
    return f"{float(x):.16e}"


def thread_count() -> int:
    raw = os.environ.get("PARAMGUIDE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PARAMGUIDE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("PARAMGUIDE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(raw) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _load(path):
    return load_config(path if path else bundled_config_path(DEFAULT_CONFIG))


def write_manifest(directory: Path, subcommand: str, flags: dict, raw_config, artifacts, started,
                   extra=None) -> Path:
    manifest = {
        "config_hash": config_hash(raw_config),
        "subcommand": subcommand,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "artifact_paths": [str(p) for p in artifacts],
        "wall_time_s": time.perf_counter() - started,
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    path = directory / "manifest.json"
    write_json(path, manifest)
    return path


# --------------------------------------------------------------------------

@click.group()
@click.version_option(__version__, prog_name="paramguide")
def cli():
    """Down-conversion in lossy waveguides: spectra, correlations, quantized pump, Fock IVP."""


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             default=None, help="JSON device config (default: bundled reference device).")


def _spectrum_rows(cfg, L, nu):
    sig = np.atleast_1d(spectral_solver.signal_flux_density(nu, L, cfg))
    nte, ntm = (np.atleast_1d(v) for v in spectral_solver.noise_flux_density(nu, L, cfg))
    return zip(nu / THZ, sig, nte, ntm)


SPECTRUM_HEADER = ["nu_thz", "signal_density", "noise_te_density", "noise_tm_density"]


def _nu_grid(cfg, L, nu_min, nu_max, samples):
    if samples < 2:
        raise ConfigError("--samples must be >= 2")
    if nu_min is None or nu_max is None:
        half = spectral_solver.DEFAULT_SPAN * total_spdc_bandwidth(cfg, L) / THZ
        nu_min = -half if nu_min is None else nu_min
        nu_max = half if nu_max is None else nu_max
    if not nu_max > nu_min:
        raise ConfigError("--nu-max-thz must exceed --nu-min-thz")
    return np.linspace(nu_min, nu_max, samples) * THZ


@cli.command()
@config_option
@click.option("--length-cm", type=float, default=None, help="Device length (default: from config).")
@click.option("--nu-min-thz", type=float, default=None)
@click.option("--nu-max-thz", type=float, default=None)
@click.option("--samples", type=int, default=spectral_solver.DEFAULT_SAMPLES, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("spectrum.csv"),
              show_default=True)
def spectrum(config_path, length_cm, nu_min_thz, nu_max_thz, samples, out):
    """Signal and noise spectral densities (photons/s per rad/s)."""
    started = time.perf_counter()
    loaded = _load(config_path)
    cfg = loaded.device
    L = cfg.length if length_cm is None else length_cm
    if L <= 0:
        raise ConfigError("--length-cm must be positive")
    nu = _nu_grid(cfg, L, nu_min_thz, nu_max_thz, samples)
    write_csv(out, SPECTRUM_HEADER, _spectrum_rows(cfg, L, nu))
    write_manifest(out.parent, "spectrum", dict(config=config_path, length_cm=L, nu_min_thz=nu_min_thz,
                                                nu_max_thz=nu_max_thz, samples=samples, out=out),
                   loaded.raw, [out], started)
    click.echo(str(out))


@cli.command()
@config_option
@click.option("--length-cm", type=float, default=None)
@click.option("--center-thz", type=float, default=6.0, show_default=True)
@click.option("--width-thz", type=float, default=0.3, show_default=True)
@click.option("--tau-min-ps", type=float, default=-1.0, show_default=True)
@click.option("--tau-max-ps", type=float, default=1.0, show_default=True)
@click.option("--samples", type=int, default=401, show_default=True)
@click.option("--kernel", type=click.Choice(correlations.KERNELS), default="low_gain", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("correlation.csv"),
              show_default=True)
def correlation(config_path, length_cm, center_thz, width_thz, tau_min_ps, tau_max_ps, samples, kernel, out):
    """Normalized TE/TM flux correlation Theta(tau) for mirror-image windows."""
    started = time.perf_counter()
    loaded = _load(config_path)
    cfg = loaded.device
    L = cfg.length if length_cm is None else length_cm
    if samples < 1 or tau_max_ps < tau_min_ps:
        raise ConfigError("need --samples >= 1 and --tau-max-ps >= --tau-min-ps")
    taus = np.linspace(tau_min_ps, tau_max_ps, samples) * 1e-12
    w = correlations.Windows(center_thz * THZ, width_thz * THZ)
    res = correlations.theta(w, L, taus, cfg, kernel)
    th, K = np.atleast_1d(res.theta), np.atleast_1d(res.K)
    rows = ((t * 1e12, a, b, res.D_te, res.D_tm) for t, a, b in zip(taus, th, K))
    write_csv(out, ["tau_ps", "theta", "K", "D_te", "D_tm"], rows)
    write_manifest(out.parent, "correlation",
                   dict(config=config_path, length_cm=L, center_thz=center_thz, width_thz=width_thz,
                        tau_min_ps=tau_min_ps, tau_max_ps=tau_max_ps, samples=samples, kernel=kernel, out=out),
                   loaded.raw, [out], started,
                   {"noise_band_warning": res.noise_band_warning})
    if res.noise_band_warning:
        click.echo("warning: detection window reaches the noise band; Langevin terms are not negligible",
                   err=True)
    click.echo(str(out))


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="JSON config (default: bundled paper_qpump.json).")
@click.option("--bands", type=int, default=None, help="Band count (default: config qpump.bands or 2).")
@click.option("--band-width-thz", type=float, default=None, help="Band width / 2 pi (default: config).")
@click.option("--z-max-cm", type=float, default=None, help="Propagation length (default: device length).")
@click.option("--steps", type=int, default=10_000, show_default=True)
@click.option("--record-every", type=int, default=1, show_default=True)
@click.option("--mode", type=click.Choice(["two-band", "n-band", "asymptotic"]), default="n-band",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("qpump.csv"),
              show_default=True)
def qpump(config_path, bands, band_width_thz, z_max_cm, steps, record_every, mode, out):
    """Single-photon pump: amplitudes C_p and C_W along z."""
    started = time.perf_counter()
    loaded = load_config(config_path if config_path else bundled_config_path("paper_qpump.json"))
    cfg = loaded.device
    bw = band_width_thz * THZ if band_width_thz is not None else loaded.band_width
    if bw is None:
        raise ConfigError("band width missing: pass --band-width-thz or set qpump.band_width_thz")
    n = bands if bands is not None else (loaded.bands or 2)
    if mode == "two-band":
        n = 2
    z_max = cfg.length if z_max_cm is None else z_max_cm
    if steps < 1 or record_every < 1 or z_max < 0:
        raise ConfigError("need --steps >= 1, --record-every >= 1, --z-max-cm >= 0")
    grid = quantized_pump.BandGrid.uniform(n, bw)
    extra = {"bands": n, "band_width_rad_s": bw}

    if mode == "asymptotic":
        reg = quantized_pump.broadband_regime(cfg, grid.total_width)
        z = np.linspace(0.0, z_max, steps // record_every + 1)
        if reg.regime is quantized_pump.BroadbandRegime.RABI:
            cols = {"abs_cp_sq": np.cos(reg.rabi_wavenumber * z) ** 2}
        elif reg.regime is quantized_pump.BroadbandRegime.DECAY:
            cols = {"abs_cp_sq": np.exp(-2 * reg.decay_half * z),
                    "abs_cp_sq_full_rate": np.exp(-2 * reg.decay_full * z)}
        else:
            raise ConfigError(f"alpha = {reg.alpha:.4g} is between the asymptotic limits; use --mode n-band")
        first = cols["abs_cp_sq"]
        header = ["z_cm", "abs_cp_sq", "sum_cw_sq"] + [k for k in cols if k != "abs_cp_sq"]
        rows = zip(z, first, 1 - first, *[v for k, v in cols.items() if k != "abs_cp_sq"])
        extra.update(alpha=reg.alpha, regime=reg.regime.value, rabi_wavenumber=reg.rabi_wavenumber,
                     decay_half=reg.decay_half, decay_full=reg.decay_full)
    else:
        if mode == "two-band":
            delta = float(cfg.inverse_velocity_mismatch * -grid.nu_values[1])
            z = np.linspace(0.0, z_max, steps // record_every + 1)
            sol = quantized_pump.two_band_closed_form(delta, cfg.G, grid.Q0, z)
            cp = np.atleast_1d(sol.C_p)
            cw = np.column_stack([np.atleast_1d(sol.C_W2), np.atleast_1d(sol.C_W1)])
            extra.update(K_R=sol.K_R, delta_per_cm=delta,
                         decay_probability=quantized_pump.decay_probability(sol.K_R, z_max))
        else:
            traj = quantized_pump.propagate_amplitudes(grid, cfg, z_max, steps, record_every=record_every)
            z, cp, cw = traj.z, traj.C_p, traj.C_W
            extra["max_norm_drift"] = float(np.max(np.abs(traj.norm - 1)))
        header = (["z_cm", "abs_cp_sq", "sum_cw_sq"] + [f"cw_re_{i}" for i in range(n)]
                  + [f"cw_im_{i}" for i in range(n)])
        rows = (np.concatenate(([zz, abs(p) ** 2, np.sum(np.abs(w) ** 2)], w.real, w.imag))
                for zz, p, w in zip(z, cp, cw))
    write_csv(out, header, rows)
    write_manifest(out.parent, "qpump", dict(config=config_path, bands=n, band_width_thz=bw / THZ,
                                             z_max_cm=z_max, steps=steps, record_every=record_every,
                                             mode=mode, out=out), loaded.raw, [out], started, extra)
    click.echo(str(out))


@cli.command()
@click.option("--m-abs", type=float, required=True, help="|M| in erg.")
@click.option("--m-arg", type=float, default=0.0, show_default=True, help="Arg M in rad.")
@click.option("--t-int-s", type=float, required=True, help="Interaction time in s.")
@click.option("--nmax", type=int, default=fock_ivp.DEFAULT_NMAX, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("ivp.json"),
              show_default=True)
def ivp(m_abs, m_arg, t_int_s, nmax, out):
    """Exact pair amplitudes C_n from vacuum under the pair interaction."""
    started = time.perf_counter()
    arg = fock_ivp.squeeze_argument(m_abs, m_arg, t_int_s)
    state = fock_ivp.evolve_pair(arg, nmax)
    payload = {
        "n": list(range(state.n_max + 1)),
        "c_re": [float(v) for v in state.amplitudes.real],
        "c_im": [float(v) for v in state.amplitudes.imag],
        "leak": state.leak,
        "squeeze_arg": [arg.real, arg.imag],
        "phase_convention": fock_ivp.PHASE_CONVENTION,
    }
    write_json(out, payload)
    flags = dict(m_abs=m_abs, m_arg=m_arg, t_int_s=t_int_s, nmax=nmax, out=str(out))
    # no config file here; the physical inputs are the flags themselves
    write_manifest(out.parent, "ivp", flags, {k: v for k, v in flags.items() if k != "out"}, [out], started)
    click.echo(str(out))


@cli.command()
@click.option("--family", "families", multiple=True, type=click.Choice(list(verification.FAMILIES)),
              help="Run only these families (repeatable).")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("verify.json"),
              show_default=True)
def verify(families, out):
    """Closed form against the numerical oracles; nonzero exit on any failure."""
    started = time.perf_counter()
    results = verification.run_all(list(families) or None)
    report = [r.as_dict() for r in results]
    write_json(out, report)
    write_manifest(out.parent, "verify", dict(family=list(families), out=out), {}, [out], started)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.case:<22} {r.max_rel_err:.3e} (tol {r.tolerance:g})")
    if not all(r.passed for r in results):
        raise AccuracyError("one or more verification families failed")


def _parse_lengths(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--lengths must be comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("--lengths needs at least one positive value")
    return vals


@cli.command()
@config_option
@click.option("--lengths", required=True, help="Comma-separated device lengths in cm.")
@click.option("--nu-min-thz", type=float, default=None)
@click.option("--nu-max-thz", type=float, default=None)
@click.option("--samples", type=int, default=spectral_solver.DEFAULT_SAMPLES, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=Path("sweep"),
              show_default=True)
def sweep(config_path, lengths, nu_min_thz, nu_max_thz, samples, out_dir):
    """Spectra for several device lengths, plus a summary table."""
    started = time.perf_counter()
    loaded = _load(config_path)
    cfg = loaded.device
    Ls = _parse_lengths(lengths)
    # one common grid (set by the shortest device) keeps the spectra comparable
    nu = _nu_grid(cfg, min(Ls), nu_min_thz, nu_max_thz, samples)

    def cell(L):
        rows = list(_spectrum_rows(cfg, L, nu))
        path = out_dir / f"spectrum_L{L:g}cm.csv"
        write_csv(path, SPECTRUM_HEADER, rows)
        peak = max(r[1] for r in rows)
        return path, (L, total_spdc_bandwidth(cfg, L) / THZ, peak)

    with ThreadPoolExecutor(max_workers=min(thread_count(), len(Ls))) as pool:
        results = list(pool.map(cell, Ls))
    summary = out_dir / "sweep_summary.csv"
    write_csv(summary, ["length_cm", "total_bandwidth_thz", "peak_signal_density"], [r for _, r in results])
    paths = [p for p, _ in results] + [summary]
    write_manifest(out_dir, "sweep", dict(config=config_path, lengths=Ls, nu_min_thz=nu_min_thz,
                                          nu_max_thz=nu_max_thz, samples=samples, out_dir=out_dir),
                   loaded.raw, paths, started)
    click.echo(str(out_dir))


def main(argv=None) -> int:
    """Run the CLI and return its exit code instead of raising SystemExit."""
    try:
        cli.main(args=argv, prog_name="paramguide", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except AccuracyError as exc:
        click.echo(f"accuracy error: {exc}", err=True)
        return EXIT_ACCURACY
    except ParamGuideError as exc:
        # config, regime, range and precondition problems are all input errors
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
