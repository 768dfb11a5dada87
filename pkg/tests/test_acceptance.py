"""Acceptance criteria 1-12.

Each test carries a ``criterion`` marker; the session summary prints one
PASS/FAIL line per criterion with the measured numbers underneath.
Desk-scale criteria (5-8, 11) share trained runs through the ``desk_runs``
cache, on the fixed test seeds 0, 1 and 2. The desk presets were chosen on a
separate tuning seed before these seeds were ever run.
"""

import time

import numpy as np
import pytest

from mmgn import autograd as ag
from mmgn.analysis import snapshot_pod
from mmgn.data import (
    GridField,
    SamplingSpec,
    count_bounds,
    generate_synthetic,
    read_field,
    read_observations,
    sample_task,
    write_field,
    write_observations,
)
from mmgn.experiment import DESK_MODELS, desk_spec, loss_history_csv, run_experiment
from mmgn.metrics import promotion
from mmgn.models import MmgnDims, baseline_graph, init_baseline, init_mmgn, mmgn_forward, mmgn_graph
from mmgn.models.gabor import GaborTerm, gabor_product_expand, unit_term
from mmgn.models.mmgn import linear_expansion
from mmgn.plotting import render_heatmap

from table1 import PROMOTION, task_errors

SEEDS = (0, 1, 2)
BASELINES = ("resmlp", "siren", "ffn_p", "ffn_g")

# ---------------------------------------------------------------- 1


def _mse_loss(pred_fn, u):
    def f(g, v):
        return ag.mean(ag.square(pred_fn(g, v) - u))
    return f


def _worst_entry(f, params):
    """The entry behind a gradient_check result, with a coarser-step cross-check.

    Only used to explain a failure: it reports the analytic value next to the
    central differences at the pinned step and at 1e-4.
    """
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    ad = ag.gradients(f, params)

    def central(flat, i, h):
        orig = flat[i]
        flat[i] = orig + h
        fp = ag.evaluate(f, params)
        flat[i] = orig - h
        fm = ag.evaluate(f, params)
        flat[i] = orig
        return (fp - fm) / (2 * h)

    worst = (-1.0, "", 0)
    for name, arr in params.items():
        flat = arr.reshape(-1)
        for i in range(flat.size):
            g, fd = ad[name].reshape(-1)[i], central(flat, i, 1e-6)
            worst = max(worst, (abs(g - fd) / max(1e-12, abs(g) + abs(fd)), name, i))
    _, name, i = worst
    flat = params[name].reshape(-1)
    return (f"{name}[{i}] ad {ad[name].reshape(-1)[i]:.6e}, fd(1e-6) {central(flat, i, 1e-6):.6e}, "
            f"fd(1e-4) {central(flat, i, 1e-4):.6e}")


@pytest.mark.criterion(1, "gradient_check <= 1e-5 for all five architectures (step 1e-6, f64)")
def test_c01_gradient_correctness(acceptance_note):
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1, 1, (8, 2))
    xt = np.column_stack([xs, rng.uniform(-1, 1, 8)])
    u = rng.normal(size=8)
    checks = {}

    m = init_mmgn(MmgnDims(d_z=3, d_h=8, n_layers=4), 3.0, seed=1)
    index = np.array([0, 1, 0, 1, 1, 0, 0, 1])

    def mmgn_pred(g, v):
        return mmgn_graph(m, {k: v[k] for k in m.params}, g.constant(xs), v["z"], index)

    checks["mmgn"] = (_mse_loss(mmgn_pred, u), {**m.params, "z": rng.normal(size=(2, 3))})

    specs = {"siren": dict(width=8, depth=4, w0=5.0),
             "ffn_p": dict(width=8, depth=4, freq_const=2.0, n_freq=3),
             "ffn_g": dict(width=8, depth=4, sigma=1.0, encode_size=4)}
    for arch, opts in specs.items():
        b = init_baseline(arch, 3, seed=2, **opts)
        checks[arch] = (
            _mse_loss(lambda g, v, b=b: baseline_graph(b, v, g.constant(xt), training=True), u),
            b.params)

    r = init_baseline("resmlp", 3, seed=2, width=8, n_blocks=3)
    for k in r.buffers:
        r.buffers[k] = rng.uniform(0.5, 1.5, r.buffers[k].shape)
    checks["resmlp (running stats)"] = (
        _mse_loss(lambda g, v: baseline_graph(r, v, g.constant(xt), training=False), u), r.params)
    # with batch statistics the bias feeding each normalization cancels out exactly;
    # its analytic gradient must be zero and the remaining parameters are checked as usual
    inert = {k: v for k, v in r.params.items() if ".fc" in k and k.endswith(".b")}
    live = {k: v for k, v in r.params.items() if k not in inert}

    def resmlp_batch(g, v):
        pv = {**v, **{k: g.constant(a) for k, a in inert.items()}}
        return baseline_graph(r, pv, g.constant(xt), training=True)

    checks["resmlp (batch stats)"] = (_mse_loss(resmlp_batch, u), live)
    errors = {name: ag.gradient_check(f, params, step=1e-6) for name, (f, params) in checks.items()}
    full = ag.gradients(_mse_loss(lambda g, v: baseline_graph(r, v, g.constant(xt), training=True),
                                  u), r.params)
    inert_max = max(float(np.max(np.abs(full[k]))) for k in inert)

    elapsed = time.perf_counter() - started
    for name, err in errors.items():
        acceptance_note(f"{name:<24} max rel err {err:.2e}")
        if err > 1e-5:
            acceptance_note(f"{'':<24} worst entry {_worst_entry(*checks[name])}")
    acceptance_note(f"ResMLP pre-normalization biases: |grad| <= {inert_max:.1e}; {elapsed:.1f}s")
    assert all(err <= 1e-5 for err in errors.values()), errors
    assert inert_max < 1e-12
    assert elapsed < 60


# ---------------------------------------------------------------- 2


def _random_term(rng):
    return GaborTerm(float(rng.gamma(6.0, 1.0)), rng.uniform(-1, 1, 2), rng.normal(0, 8, 2),
                     float(rng.uniform(-np.pi, np.pi)), rng.choice(["sin", "cos"]))


@pytest.mark.criterion(2, "Gabor product expansion matches the direct product (<= 1e-10)")
def test_c02_gabor_product(acceptance_note):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        g1, g2 = _random_term(rng), _random_term(rng)
        x = rng.uniform(-1, 1, (1000, 2))
        c, a, b = gabor_product_expand(g1, g2)
        worst = max(worst, float(np.max(np.abs(g1(x) * g2(x) - 0.5 * c * (a(x) - b(x))))))
    acceptance_note(f"100 pairs x 1000 points: max |diff| {worst:.2e}")
    assert worst <= 1e-10


# ---------------------------------------------------------------- 3


def _hand_expansion(model, z):
    """Two-layer decoder written out by hand as Gabor atoms.

    out = sum_j v_j g2_j (sum_k W_jk g1_k + a_j) + c, with a = W_z z + b; every
    product g2_j g1_k is one closed-form pair of atoms.
    """
    p = model.params
    b1, b2 = model.bank(0), model.bank(1)
    v, c = p["out.w"][0], float(p["out.b"][0])
    w_h = p["layers.0.w_h"]
    a = p["layers.0.w_z"] @ z + p["layers.0.b"]
    atoms = []
    for j in range(model.dims.d_h):
        g2 = unit_term(b2, j)
        atoms.append((v[j] * a[j], g2))
        for k in range(model.dims.d_h):
            coef, ta, tb = gabor_product_expand(g2, unit_term(b1, k))
            atoms.append((0.5 * v[j] * w_h[j, k] * coef, ta))
            atoms.append((-0.5 * v[j] * w_h[j, k] * coef, tb))
    return atoms, c


@pytest.mark.criterion(3, "two-layer Gabor-basis expansion equals mmgn_forward (<= 1e-9, 32x32)")
def test_c03_linear_expansion(acceptance_note):
    axis = np.linspace(-1, 1, 32)
    grid = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
    worst_hand = worst_lib = 0.0
    for seed, (d_h, d_z) in enumerate([(4, 2), (3, 1), (4, 1), (2, 2)]):
        model = init_mmgn(MmgnDims(d_z=d_z, d_h=d_h, n_layers=2), 4.0, seed=seed)
        z = np.random.default_rng(seed).normal(size=d_z)
        direct = mmgn_forward(model, z, grid)
        atoms, bias = _hand_expansion(model, z)
        hand = bias + sum(c * t(grid) for c, t in atoms)
        lib_atoms, lib_bias = linear_expansion(model, z)
        lib = lib_bias + sum(c * t(grid) for c, t in lib_atoms)
        worst_hand = max(worst_hand, float(np.max(np.abs(hand - direct))))
        worst_lib = max(worst_lib, float(np.max(np.abs(lib - direct))))
    acceptance_note(f"hand-assembled max |diff| {worst_hand:.2e}; library {worst_lib:.2e}")
    assert worst_hand <= 1e-9 and worst_lib <= 1e-9


# ---------------------------------------------------------------- 4


@pytest.mark.criterion(4, "promotion() reproduces the published sim s=5% and satellite s=0.1% rows")
def test_c04_promotion(acceptance_note):
    worst = 0.0
    for block in ("sim s=5%", "sat s=0.1%"):
        got = [promotion(task_errors(block, t)).promotion_pct for t in (1, 2, 3, 4)]
        acceptance_note(f"{block:<11} " + "  ".join(f"{g:.3f}" for g in got))
        worst = max(worst, max(abs(g - e) for g, e in zip(got, PROMOTION[block])))
    acceptance_note(f"max deviation {worst:.4f} percentage points")
    assert worst <= 0.02


# ---------------------------------------------------------------- 5-8 (desk scale)


def _median(xs):
    return float(np.median(xs))


@pytest.mark.slow
@pytest.mark.criterion(5, "desk MMGN MSE < 5e-3 and MMGN <= FFN+G on >= 2 of 3 seeds")
def test_c05_desk_ordering(desk_runs, acceptance_note):
    counts = {arch: desk_spec(arch).model_spec().build().n_params() for arch in DESK_MODELS}
    acceptance_note("decoder parameters: " + ", ".join(f"{a} {n}" for a, n in counts.items()))
    assert max(counts.values()) <= 1.2 * min(counts.values())
    wins, seconds = 0, 0.0
    mmgn_mses = []
    for seed in SEEDS:
        ours, theirs = desk_runs.get("mmgn", seed), desk_runs.get("ffn_g", seed)
        seconds += ours.seconds + theirs.seconds
        wins += ours.mse <= theirs.mse
        mmgn_mses.append(ours.mse)
        acceptance_note(f"seed {seed}: MMGN {ours.mse:.3e}  FFN+G {theirs.mse:.3e}")
    acceptance_note(f"MMGN wins {wins}/3; training time for these runs {seconds / 60:.1f} min")
    assert all(m < 5e-3 for m in mmgn_mses)
    assert wins >= 2
    assert seconds < 15 * 60


@pytest.mark.slow
@pytest.mark.expected
@pytest.mark.xfail(strict=False, reason="tracked expectation; a miss is logged as a deviation")
@pytest.mark.criterion(6, "d_z = 1 MMGN within 1.1x of the best baseline (median over seeds)")
def test_c06_latent_size_one(desk_runs, acceptance_note):
    ours, best = [], []
    for seed in SEEDS:
        base = {arch: desk_runs.get(arch, seed).mse for arch in BASELINES}
        winner = min(base, key=base.get)
        ours.append(desk_runs.get("mmgn", seed, model__d_z=1).mse)
        best.append(base[winner])
        acceptance_note(f"seed {seed}: MMGN(d_z=1) {ours[-1]:.3e}  best baseline {winner} "
                        f"{base[winner]:.3e}  ratio {ours[-1] / base[winner]:.2f}")
    acceptance_note(f"median ratio {_median(ours) / _median(best):.2f} (target <= 1.10)")
    assert _median(ours) <= 1.1 * _median(best)


@pytest.mark.slow
@pytest.mark.criterion(7, "MMGN MSE nondecreasing over noise 0, 1%, 5%, 10% (median over seeds)")
def test_c07_noise_monotone(desk_runs, acceptance_note):
    medians = []
    for ratio in (0.0, 0.01, 0.05, 0.10):
        mses = [desk_runs.get("mmgn", seed, noise__ratio=ratio).mse for seed in SEEDS]
        medians.append(_median(mses))
        acceptance_note(f"noise {ratio:>4.0%}: " + "  ".join(f"{m:.3e}" for m in mses)
                        + f"  median {medians[-1]:.3e}")
    assert all(a <= b for a, b in zip(medians, medians[1:]))


@pytest.mark.slow
@pytest.mark.criterion(8, "mean ablation NMSE strictly decreasing over d_z 4, 16, 64 (median)")
def test_c08_xai_trend(desk_runs, acceptance_note):
    medians = []
    for d_z in (4, 16, 64):
        runs = [desk_runs.get("mmgn", seed, model__d_z=d_z) for seed in SEEDS]
        medians.append(_median([r.mean_nmse for r in runs]))
        acceptance_note(f"d_z {d_z:>2}: mean NMSE " + "  ".join(f"{r.mean_nmse:.3g}%" for r in runs)
                        + f"  median {medians[-1]:.3g}%")
    assert medians[0] > medians[1] > medians[2]


# ---------------------------------------------------------------- 9


def _orthonormal(n, k, rng, centered=False):
    a = rng.normal(size=(n, k))
    if centered:
        a -= a.mean(axis=0)  # QR of centered columns keeps them zero-mean
    return np.linalg.qr(a)[0]


@pytest.mark.criterion(9, "snapshot POD: exact rank, monotone energy ending at 1, modes_for(0.9) = r")
def test_c09_pod(acceptance_note):
    rng = np.random.default_rng(9)
    n_t, n_h, n_w = 40, 12, 10
    time_modes = _orthonormal(n_t, 30, rng, centered=True)
    space_modes = _orthonormal(n_h * n_w, n_t, rng).T
    for r in (1, 2, 5, 12):
        amps = np.linspace(3.0, 1.0, r)
        cube = (time_modes[:, :r] * amps) @ space_modes[:r]
        pod = snapshot_pod(cube.reshape(n_t, n_h, n_w))
        n_big = int(np.sum(pod.eigenvalues > 1e-10 * pod.eigenvalues[0]))
        acceptance_note(f"rank {r:>2}: {n_big} eigenvalues above 1e-10 lambda_max, "
                        f"final energy 1 {pod.cumulative_energy[-1] - 1:+.1e}")
        assert n_big == r
        assert np.all(np.diff(pod.cumulative_energy) >= 0)
        assert abs(pod.cumulative_energy[-1] - 1.0) <= 1e-12
    for r in (1, 3, 8):
        # r equal-amplitude modes carry 92% of the energy, ten weak modes the rest
        lead = np.full(r, 0.92 / r)
        tail = np.full(10, 0.08 / 10)
        amps = np.sqrt(np.concatenate([lead, tail]))
        cube = (time_modes[:, :r + 10] * amps) @ space_modes[:r + 10]
        pod = snapshot_pod(GridField(cube.reshape(n_t, n_h, n_w)))
        acceptance_note(f"equal amplitudes r={r}: modes_for(0.9) = {pod.modes_for(0.9)}")
        assert pod.modes_for(0.9) == r


# ---------------------------------------------------------------- 10

GOLDEN_PGM = b"P5\n4 2\n255\n" + bytes([0, 36, 73, 109, 146, 182, 219, 255])


@pytest.mark.criterion(10, "FGRD and observation CSV round-trip; PGM golden bytes stable")
def test_c10_roundtrips(tmp_path, acceptance_note):
    field = generate_synthetic("spectral-grf", (4, 9, 7), seed=10, coord_range=(-3, 4, 10, 12))
    field = GridField(field.values.astype(np.float32).astype(np.float64), field.coord_range,
                      np.array([0.0, 0.25, 1.5, 7.0]))
    write_field(field, tmp_path / "a.fgrd")
    back = read_field(tmp_path / "a.fgrd")
    write_field(back, tmp_path / "b.fgrd")
    assert (tmp_path / "a.fgrd").read_bytes() == (tmp_path / "b.fgrd").read_bytes()
    np.testing.assert_array_equal(back.values, field.values)
    np.testing.assert_array_equal(back.time_stamps, field.time_stamps)
    assert back.coord_range == field.coord_range

    obs = sample_task(field, SamplingSpec(4, 0.3, seed=1))
    write_observations(obs, tmp_path / "obs.csv")
    again = read_observations(tmp_path / "obs.csv")
    assert len(again) == len(obs)
    for a, b in zip(obs, again):
        assert a.time_index == b.time_index
        np.testing.assert_array_equal(a.coords, b.coords)
        np.testing.assert_array_equal(a.values, b.values)

    ramp = np.arange(8.0).reshape(2, 4)
    blobs = [render_heatmap(ramp, tmp_path / f"h{i}.pgm") for i in range(2)]
    assert blobs[0] == blobs[1] == GOLDEN_PGM
    acceptance_note(f"FGRD {len(back.values.ravel())} values bit-identical, "
                    f"{sum(len(o) for o in obs)} observations value-identical, PGM golden match")


# ---------------------------------------------------------------- 11


@pytest.mark.slow
@pytest.mark.criterion(11, "same ExperimentSpec and seed give bit-identical loss history and metrics")
def test_c11_determinism(desk_runs, acceptance_note):
    first = desk_runs.get("mmgn", 0)
    again = run_experiment(desk_spec("mmgn", 0))
    assert loss_history_csv(again.train.history) == first.history_csv
    assert again.metrics.to_csv() == first.metrics_csv
    acceptance_note(f"desk MMGN seed 0: {len(again.train.history)} epochs, MSE {again.metrics.mse:.6e}"
                    " identical across runs")


# ---------------------------------------------------------------- 12


@pytest.mark.criterion(12, "sampler counts and fixed-site contracts for tasks 1-4")
def test_c12_sampler_contracts(acceptance_note):
    checked = 0
    rng = np.random.default_rng(12)
    for _ in range(60):
        n_h, n_w = rng.integers(5, 40, size=2)
        ratio = float(rng.choice([0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 0.9, 1.0]))
        n = int(n_h * n_w)
        lo, hi = count_bounds(ratio, n)
        if lo < 1:
            continue
        field = GridField(np.zeros((int(rng.integers(2, 12)), n_h, n_w)))
        assert (lo, hi) == (int(np.floor(ratio * n)), int(np.floor(min(5 * ratio, 1.0) * n)))
        for task in (1, 2, 3, 4):
            obs = sample_task(field, SamplingSpec(task, ratio, seed=int(rng.integers(1 << 30))))
            counts = [len(o) for o in obs]
            if task in (1, 3):
                assert all(c == lo for c in counts)
            else:
                assert all(lo <= c <= hi for c in counts)
            if task == 1:
                assert all(np.array_equal(o.sites, obs[0].sites) for o in obs)
            checked += len(obs)
    acceptance_note(f"{checked} observation sets checked")
    assert checked > 0
