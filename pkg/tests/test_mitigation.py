import numpy as np
import pytest

from pqelab.backends import Sampler
from pqelab.circuits import Circuit, gate_h
from pqelab.engine import NoiseSpec, ShotTable, run_exact, sample
from pqelab.mitigation import (CalibrationMatrix, ExtrapolationPolicy,
                               MitigationError, ParityRule, calibrate_readout,
                               extrapolate, postselect, postselect_probs,
                               staircase_transform, taper_parity_custom,
                               taper_standard, unfold_counts)
from pqelab.models import TfimSpec, build_tfim, correlation_observables
from pqelab.paulis import ObservableSum, PauliString


def even_sector_eigenvalues(obs):
    dense = obs.dense()
    idx = [i for i in range(dense.shape[0]) if bin(i).count("1") % 2 == 0]
    return np.sort(np.linalg.eigvalsh(dense[np.ix_(idx, idx)]))


class TestCalibration:
    def test_noiseless_identity(self):
        sampler = Sampler(rng=np.random.default_rng(0))
        cal = calibrate_readout(sampler, 2, 4096)
        assert np.max(np.abs(cal.matrix - np.eye(4))) < 5 * np.sqrt(0.25 / 4096)

    def test_single_qubit_confusion_recovered(self):
        conf = [[0.95, 0.10], [0.05, 0.90]]
        sampler = Sampler(noise=NoiseSpec(readout=conf),
                          rng=np.random.default_rng(1))
        cal = calibrate_readout(sampler, 1, 8192)
        sigma = 5 * np.sqrt(0.1 * 0.9 / 8192)
        assert np.max(np.abs(cal.matrix - np.array(conf))) < sigma

    def test_magnification_shrinks_error(self):
        conf = [[0.9, 0.2], [0.1, 0.8]]
        errs = []
        for mag, seed in ((1, 2), (10, 3)):
            spread = []
            for rep in range(12):
                sampler = Sampler(noise=NoiseSpec(readout=conf),
                                  rng=np.random.default_rng(100 * seed + rep))
                cal = calibrate_readout(sampler, 1, 2048, magnification=mag)
                spread.append(cal.matrix[0, 0])
            errs.append(np.std(spread))
        ratio = errs[0] / errs[1]
        assert 1.8 < ratio < 5.5  # expected sqrt(10) ~ 3.2

    def test_column_validation(self):
        with pytest.raises(ValueError):
            CalibrationMatrix(1, np.array([[0.5, 0.2], [0.4, 0.8]]), 10)


class TestUnfolding:
    def test_identity_matrix_is_noop(self):
        cal = CalibrationMatrix(1, np.eye(2), 100)
        table = ShotTable(1, {"0": 600, "1": 400})
        assert np.allclose(unfold_counts(table, cal), [0.6, 0.4])

    def test_two_by_two_closed_form(self):
        cal = CalibrationMatrix(1, np.array([[0.95, 0.10], [0.05, 0.90]]), 100)
        table = ShotTable(1, {"0": 500, "1": 500})
        p = unfold_counts(table, cal)
        assert np.allclose(p, [0.4 / 0.85, 0.45 / 0.85], atol=1e-9)

    def test_observation_equal_to_column(self):
        a = np.array([[0.95, 0.10], [0.05, 0.90]])
        cal = CalibrationMatrix(1, a, 100)
        table = ShotTable(1, {"0": 9500, "1": 500})
        assert np.allclose(unfold_counts(table, cal), [1.0, 0.0], atol=1e-9)

    def test_always_a_probability_vector(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            # random column-stochastic matrix and random observation
            a = rng.uniform(0.02, 1.0, size=(4, 4))
            a /= a.sum(axis=0)
            cal = CalibrationMatrix(1, None, 1) if False else None
            cal = CalibrationMatrix.__new__(CalibrationMatrix)
            cal.n_qubits = 2
            cal.matrix = np.kron(a[:2, :2] / a[:2, :2].sum(axis=0),
                                 a[2:, 2:] / a[2:, 2:].sum(axis=0))
            cal.shots_per_column = 100
            f = rng.multinomial(2000, rng.dirichlet(np.ones(4))) / 2000
            table = ShotTable(2, {format(i, "02b"): int(c * 2000)
                                  for i, c in enumerate(f) if c > 0})
            p = unfold_counts(table, cal)
            assert np.all(p >= -1e-12)
            assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestStaircase:
    def test_adjacent_xx_maps_to_single_x(self):
        _, smap = staircase_transform(4)
        for i in range(3):
            s = ["I"] * 4
            s[i] = "X"
            s[i + 1] = "X"
            mapped = smap.transform_string(PauliString("".join(s)))
            assert mapped.phase == 1 and mapped.weight == 1
            assert "X" in mapped.letters

    def test_parity_maps_to_last_qubit(self):
        _, smap = staircase_transform(4)
        mapped = smap.transform_string(PauliString("ZZZZ"))
        assert mapped.text() == "+1 IIIZ"

    def test_measurable_equivalence_on_random_states(self):
        # appending the staircase and measuring the image reproduces <X_i X_{i+1}>
        rng = np.random.default_rng(6)
        n = 4
        stairs, smap = staircase_transform(n)
        from pqelab.ansatz import combinatorial_ansatz
        ansatz = combinatorial_ansatz(n)
        circ = ansatz.compile(rng.normal(scale=0.5, size=ansatz.n_params))
        psi = run_exact(circ)
        phi = run_exact(circ + stairs)
        for i in range(n - 1):
            s = ["I"] * n
            s[i] = "X"
            s[i + 1] = "X"
            orig = PauliString("".join(s))
            mapped = smap.transform_string(orig)
            lhs = np.vdot(psi, _apply(orig, psi))
            rhs = np.vdot(phi, _apply(mapped.bare(), phi)) * mapped.phase
            assert lhs.real == pytest.approx(rhs.real, abs=1e-10)

    def test_identity_state_x_expectations_vanish(self):
        n = 3
        stairs, smap = staircase_transform(n)
        psi = run_exact(Circuit(n) + stairs)
        for i in range(n - 1):
            s = ["I"] * n
            s[i] = "X"
            s[i + 1] = "X"
            mapped = smap.transform_string(PauliString("".join(s)))
            assert abs(np.vdot(psi, _apply(mapped.bare(), psi))) < 1e-12

    def test_sampled_agreement(self):
        rng = np.random.default_rng(8)
        n = 4
        stairs, smap = staircase_transform(n)
        from pqelab.ansatz import combinatorial_ansatz
        ansatz = combinatorial_ansatz(n, parity_filter=True)
        circ = ansatz.compile(rng.normal(scale=0.4, size=ansatz.n_params))
        psi = run_exact(circ)
        s = PauliString("XXII")
        exact = np.vdot(psi, _apply(s, psi)).real
        mapped = smap.transform_string(s)
        rot = Circuit(n)
        for q in mapped.support:
            rot.append(gate_h(q))
        table = sample(circ, stairs + rot, 10 ** 6, seed=9)
        freq = table.frequencies()
        idx = np.arange(len(freq))
        parity = np.zeros(len(freq), dtype=int)
        for q in mapped.support:
            parity ^= (idx >> (n - 1 - q)) & 1
        est = float(freq @ (1 - 2 * parity)) * mapped.phase.real
        assert abs(est - exact) < 5 * np.sqrt(1.0 / 10 ** 6) * 3


def _apply(p, psi):
    from pqelab.engine import apply_pauli
    return apply_pauli(psi, p)


class TestPostselect:
    def test_even_parity_filtering(self):
        table = ShotTable(2, {"00": 500, "11": 480, "01": 20})
        kept, frac = postselect(table, ParityRule((0, 1), 1))
        assert kept.total_shots == 980
        assert frac == pytest.approx(0.02)
        assert "01" not in kept.counts

    def test_noiseless_parity_circuit_no_discard(self):
        from pqelab.ansatz import combinatorial_ansatz
        ansatz = combinatorial_ansatz(4, parity_filter=True)
        circ = ansatz.compile(np.full(7, 0.3))
        table = sample(circ, None, 4096, seed=10)
        _, frac = postselect(table, ParityRule((0, 1, 2, 3), 1))
        assert frac == 0.0

    def test_all_discarded_raises(self):
        table = ShotTable(2, {"01": 7})
        with pytest.raises(MitigationError):
            postselect(table, ParityRule((0, 1), 1))

    def test_prob_variant_matches(self):
        probs = np.array([0.5, 0.02, 0.0, 0.48])
        out, frac = postselect_probs(probs, ParityRule((0, 1), 1), 2)
        assert frac == pytest.approx(0.02)
        assert out[1] == 0.0 and out.sum() == pytest.approx(1.0)

    def test_mitigated_error_smaller_under_noise(self):
        # paired comparison across seeds: postselected energies are closer
        # to the ideal value than raw ones for a parity-preserving circuit
        from pqelab.ansatz import combinatorial_ansatz
        from pqelab.models import build_tfim, TfimSpec
        obs = build_tfim(TfimSpec(3))
        zgroup = ObservableSum(3, [(c, s) for c, s in obs
                                   if set(s.letters) <= {"I", "Z"}])
        ansatz = combinatorial_ansatz(3, parity_filter=True)
        theta = np.full(ansatz.n_params, 0.35)
        circ = ansatz.compile(theta)
        psi = run_exact(circ)
        exact = sum(c * np.vdot(psi, _apply(s, psi)).real for c, s in zgroup)
        noise = NoiseSpec(p2=0.05)
        raw_err, sel_err = [], []
        for seed in range(20):
            table = sample(circ, None, 4096, noise=noise, seed=seed)
            freq = table.frequencies()
            idx = np.arange(8)
            def estimate(vec):
                total = 0.0
                for c, s in zgroup:
                    par = np.zeros(8, dtype=int)
                    for q in s.support:
                        par ^= (idx >> (2 - q)) & 1
                    total += c * float(vec @ (1 - 2 * par))
                return total
            raw_err.append(abs(estimate(freq) - exact))
            kept, frac = postselect(table, ParityRule((0, 1, 2), 1))
            assert frac > 0.0
            sel_err.append(abs(estimate(kept.frequencies()) - exact))
        assert np.mean(sel_err) < np.mean(raw_err)


class TestStandardTapering:
    def test_spectrum_preserved_all_qubits(self):
        for n in (3, 4, 5, 6):
            obs = build_tfim(TfimSpec(n))
            want = even_sector_eigenvalues(obs)
            for q in range(n):
                tapered, _ = taper_standard(obs, PauliString("Z" * n), q, 1)
                got = np.sort(np.linalg.eigvalsh(tapered.dense()))
                assert np.max(np.abs(got - want)) < 1e-10

    def test_two_qubit_zz_constant(self):
        obs = ObservableSum(2, [(1.0, PauliString("ZZ"))])
        tapered, _ = taper_standard(obs, PauliString("ZZ"), 0, 1)
        assert tapered.n_qubits == 1
        assert tapered.constant == pytest.approx(1.0)

    def test_noncommuting_symmetry_rejected(self):
        obs = ObservableSum(2, [(1.0, PauliString("XI"))])
        with pytest.raises(MitigationError):
            taper_standard(obs, PauliString("ZI"), 0, 1)

    def test_trivial_qubit_rejected(self):
        obs = build_tfim(TfimSpec(3))
        with pytest.raises(MitigationError):
            taper_standard(obs, PauliString("ZZI"), 2, 1)

    def test_bitstring_map_bijection(self):
        obs = build_tfim(TfimSpec(4))
        _, tmap = taper_standard(obs, PauliString("ZZZZ"), 1, 1)
        m = tmap.bitstring_map()
        assert len(m) == 8
        assert all(bits.count("1") % 2 == 0 for bits in m)
        assert m["0000"] == "000"

    def test_odd_sector(self):
        obs = build_tfim(TfimSpec(3))
        dense = obs.dense()
        idx = [i for i in range(8) if bin(i).count("1") % 2 == 1]
        want = np.sort(np.linalg.eigvalsh(dense[np.ix_(idx, idx)]))
        tapered, tmap = taper_standard(obs, PauliString("ZZZ"), 0, -1)
        got = np.sort(np.linalg.eigvalsh(tapered.dense()))
        assert np.max(np.abs(got - want)) < 1e-10
        assert len(tmap.bitstring_map()) == 4


class TestCustomTapering:
    def test_worked_mapping(self):
        obs = build_tfim(TfimSpec(4))
        _, tmap = taper_parity_custom(obs)
        assert tmap.map_bitstring("0101") == "011"
        assert tmap.map_bitstring("0000") == "000"

    def test_odd_state_rejected(self):
        obs = build_tfim(TfimSpec(4))
        _, tmap = taper_parity_custom(obs)
        with pytest.raises(MitigationError):
            tmap.map_bitstring("0001")

    def test_spectrum_preserved(self):
        for n in (3, 4, 5, 6):
            obs = build_tfim(TfimSpec(n))
            tapered, _ = taper_parity_custom(obs)
            got = np.sort(np.linalg.eigvalsh(tapered.dense()))
            assert np.max(np.abs(got - even_sector_eigenvalues(obs))) < 1e-10

    def test_locality_structure(self):
        tapered, _ = taper_parity_custom(build_tfim(TfimSpec(5)))
        for _, s in tapered:
            assert s.weight <= 2
            if s.weight == 2:
                i, j = s.support
                assert j == i + 1

    def test_xx_becomes_single_x(self):
        obs = build_tfim(TfimSpec(4))
        _, tmap = taper_parity_custom(obs)
        for i in range(3):
            s = ["I"] * 4
            s[i] = "X"
            s[i + 1] = "X"
            mult, reduced = tmap.transform_string(PauliString("".join(s)))
            assert mult == 1.0
            assert reduced.letters.count("X") == 1 and reduced.weight == 1

    def test_correlators_match_sector_embedding(self):
        # transformed sigma_i sigma_j reproduce the untapered values exactly
        obs = build_tfim(TfimSpec(4))
        _, tmap = taper_parity_custom(obs)
        m = np.zeros((8, 16))
        for b, c in tmap.bitstring_map().items():
            m[int(c, 2), int(b, 2)] = 1.0
        for co in correlation_observables(4):
            lhs = m @ co.observable.dense() @ m.T
            rhs = tmap.transform(co.observable).dense()
            assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestExtrapolation:
    def test_linear_two_point(self):
        value, report = extrapolate([(1, 0.9), (3, 0.7)],
                                    ExtrapolationPolicy("linear"))
        assert value == pytest.approx(1.0)
        assert report.applied

    def test_exponential_closed_form(self):
        value, report = extrapolate([(1, 0.9), (3, 0.729)],
                                    ExtrapolationPolicy("exponential"))
        assert value == pytest.approx(1.0)
        assert report.applied and not report.reasons

    def test_exponential_negative_branch(self):
        value, _ = extrapolate([(1, -0.9), (3, -0.729)],
                               ExtrapolationPolicy("exponential"))
        assert value == pytest.approx(-1.0)

    @pytest.mark.parametrize("e1,e3,reason", [
        (0.001, -0.0005, "sign flip"),
        (0.5, 0.00005, "high-noise magnitude"),
        (0.5, 0.00015, "ratio above"),
        (0.1, 0.2, "magnitude increased"),
    ])
    def test_guards_fall_back_to_low_noise(self, e1, e3, reason):
        value, report = extrapolate([(1, e1), (3, e3)],
                                    ExtrapolationPolicy("exponential"))
        assert value == e1
        assert not report.applied
        assert any(reason in r for r in report.reasons)

    def test_none_returns_low_noise(self):
        value, report = extrapolate([(1.0, 0.42)], ExtrapolationPolicy("none"))
        assert value == 0.42 and not report.applied

    def test_scale_point_mismatch(self):
        with pytest.raises(ValueError):
            extrapolate([(1, 0.9), (5, 0.7)], ExtrapolationPolicy("linear"))

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            ExtrapolationPolicy("linear", (3.0, 1.0))
        with pytest.raises(ValueError):
            ExtrapolationPolicy("cubic")


def test_singular_calibration_falls_back_to_raw(caplog):
    import logging
    dim = 4
    mat = np.zeros((dim, dim))
    mat[0, :] = 1.0  # every column collapses onto "00": rank one
    cal = CalibrationMatrix(2, mat, 10)
    table = ShotTable(2, {"00": 700, "11": 300})
    with caplog.at_level(logging.WARNING):
        out = unfold_counts(table, cal)
    assert np.allclose(out, table.frequencies())
    assert any("singular" in r.message for r in caplog.records)


def test_guard_metadata_recorded_in_run_records():
    from pqelab.experiments import ExperimentConfig, run_tfim_matrix
    cfg = ExperimentConfig.model_validate({
        "model": {"kind": "tfim", "n_sites": 3},
        "backend": {"kind": "shots", "shots": 512, "seed": 4,
                    "noise": {"p2": 0.03, "readout_flip_01": 0.02,
                              "readout_flip_10": 0.02}},
        "mitigation": {"readout_calibration": True},
        "solver": {"tolerance": 0.1, "max_iter": 4},
        "repeats": 1})
    rec = run_tfim_matrix(cfg)
    assert set(rec.calibrations) == {"none", "taper", "postselect"}
    post_exp = next(u for u in rec.units
                    if u.label == {"symmetry": "postselect",
                                   "extrapolation": "exponential"})
    assert "mean_discard_fraction" in post_exp.extras
    assert "guard_reasons" in post_exp.extras
