import numpy as np
import pytest

from fundus_eval import (
    BinormalSpec,
    GradingSystem,
    PopulationSpec,
    RangeError,
    auc,
    binormal_mu,
    gen_binary_scores,
    gen_fundus_image,
    gen_ordinal_scores,
    gen_population,
    macro_roc,
    preset_population,
    records_for_system,
    roc_curve,
    scores_for_manifest,
    serialize_manifest,
)
from fundus_eval.metrics import norm_cdf


def empirical_auc(labels, scores):
    return auc(roc_curve(labels, scores))


def hanley_mcneil_sd(a, n_pos, n_neg):
    q1 = a / (2 - a)
    q2 = 2 * a * a / (1 + a)
    var = (a * (1 - a) + (n_pos - 1) * (q1 - a * a)
           + (n_neg - 1) * (q2 - a * a)) / (n_pos * n_neg)
    return np.sqrt(var)


class TestBinormalMu:
    def test_symmetric_case(self):
        assert binormal_mu(0.5) == 0.0

    def test_known_values(self):
        assert binormal_mu(0.987) == pytest.approx(3.148, abs=0.002)
        assert binormal_mu(0.841) == pytest.approx(1.412, abs=0.002)

    def test_inverse_identity(self):
        for target in (0.6, 0.75, 0.9, 0.99):
            mu = binormal_mu(target)
            assert norm_cdf(mu / np.sqrt(2)) == pytest.approx(target, abs=1e-9)

    def test_range(self):
        with pytest.raises(RangeError):
            binormal_mu(0.4)
        with pytest.raises(RangeError):
            binormal_mu(1.0)


class TestGenBinaryScores:
    def test_large_sample_hits_target(self):
        labels, scores = gen_binary_scores(
            BinormalSpec(n_pos=100_000, n_neg=100_000, target_auc=0.9, seed=0))
        assert empirical_auc(labels, scores) == pytest.approx(0.9, abs=0.005)

    def test_exchangeable_at_half(self):
        labels, scores = gen_binary_scores(
            BinormalSpec(n_pos=10_000, n_neg=10_000, target_auc=0.5, seed=1))
        assert empirical_auc(labels, scores) == pytest.approx(0.5, abs=0.01)

    def test_deterministic(self):
        spec = BinormalSpec(n_pos=50, n_neg=50, target_auc=0.8, seed=7)
        a = gen_binary_scores(spec)
        b = gen_binary_scores(spec)
        assert (a[0] == b[0]).all() and (a[1] == b[1]).all()

    def test_scores_in_unit_interval(self):
        _, scores = gen_binary_scores(BinormalSpec(n_pos=500, n_neg=500,
                                                   target_auc=0.95, seed=2))
        assert (scores > 0).all() and (scores < 1).all()

    def test_convergence_under_variance_bound(self):
        for n in (1_000, 10_000, 100_000):
            labels, scores = gen_binary_scores(
                BinormalSpec(n_pos=n, n_neg=n, target_auc=0.9, seed=n))
            bound = 4 * hanley_mcneil_sd(0.9, n, n)
            assert abs(empirical_auc(labels, scores) - 0.9) <= bound


class TestGenPopulation:
    def test_all_stratum_zero_means_all_pirc_zero(self):
        spec = PopulationSpec(system=GradingSystem.PIRC, n_patients=100,
                              stratum_probs=(1.0, 0.0, 0.0, 0.0, 0.0), seed=0)
        records = gen_population(spec)
        assert len(records) == 400
        assert all(r.pirc == 0 for r in records)

    def test_preset_marginal(self):
        records = gen_population(preset_population("table1-rdr", seed=42))
        labeled = records_for_system(records, GradingSystem.RDR)
        frac = sum(lab.index for _, lab in labeled) / len(labeled)
        assert frac == pytest.approx(0.44, abs=0.01)

    def test_marginals_converge_for_multiclass_preset(self):
        records = gen_population(preset_population("table1-pirc", seed=3))
        labeled = records_for_system(records, GradingSystem.PIRC)
        counts = np.bincount([lab.index for _, lab in labeled], minlength=5)
        fractions = counts / counts.sum()
        from fundus_eval.synth import PRESET_MARGINALS
        for got, want in zip(fractions, PRESET_MARGINALS["table1-pirc"][1]):
            assert got == pytest.approx(want, abs=0.01)

    def test_qrdr_preset_has_ungradable_class(self):
        records = gen_population(preset_population("table1-qrdr",
                                                   n_patients=2000, seed=5))
        labeled = records_for_system(records, GradingSystem.QRDR)
        ungradable = sum(1 for rec, _ in labeled if not rec.gradable)
        assert ungradable / len(labeled) == pytest.approx(5492 / 41122, abs=0.03)
        # ungradable records carry no grades
        assert all(rec.pirc is None for rec, _ in labeled if not rec.gradable)

    def test_byte_identical_manifest(self):
        spec = preset_population("table1-rdr", n_patients=50, seed=9)
        assert (serialize_manifest(gen_population(spec))
                == serialize_manifest(gen_population(spec)))

    def test_stratum_recovered_by_patient_max(self):
        spec = PopulationSpec(system=GradingSystem.PIRC, n_patients=200,
                              stratum_probs=(0.3, 0.2, 0.3, 0.1, 0.1), seed=11)
        records = gen_population(spec)
        by_patient = {}
        for rec in records:
            by_patient.setdefault(rec.patient_id, []).append(rec.pirc)
        for grades in by_patient.values():
            assert max(grades) == grades[0]  # first image attains the stratum
            assert all(g <= max(grades) for g in grades)

    def test_gradable_rate(self):
        spec = PopulationSpec(system=GradingSystem.RDR, n_patients=500,
                              stratum_probs=(0.5, 0.5), gradable_rate=0.8, seed=13)
        records = gen_population(spec)
        rate = sum(r.gradable for r in records) / len(records)
        # first image per patient always gradable, others 80%
        assert rate == pytest.approx(0.25 + 0.75 * 0.8, abs=0.03)

    def test_unknown_preset(self):
        with pytest.raises(RangeError):
            preset_population("table9-rdr")

    def test_spec_validation(self):
        with pytest.raises(RangeError):
            PopulationSpec(system=GradingSystem.RDR, n_patients=0,
                           stratum_probs=(0.5, 0.5))
        with pytest.raises(RangeError):
            PopulationSpec(system=GradingSystem.RDR, n_patients=1,
                           stratum_probs=(0.5, 0.4))
        with pytest.raises(RangeError):
            PopulationSpec(system=GradingSystem.RDR, n_patients=1,
                           stratum_probs=(0.5, 0.5, 0.0))


class TestGenOrdinalScores:
    def test_zero_quality_uniform(self):
        labels = np.random.default_rng(0).integers(0, 4, 10_000)
        probs = gen_ordinal_scores(labels, 4, quality=0.0, seed=1)
        assert (probs == 0.25).all()
        per_class = [((labels == c).astype(int), probs[:, c]) for c in range(4)]
        _, macro = macro_roc(per_class)
        assert macro == pytest.approx(0.5, abs=0.02)

    def test_high_quality_high_accuracy(self):
        labels = np.random.default_rng(2).integers(0, 5, 1000)
        probs = gen_ordinal_scores(labels, 5, quality=12.0, seed=3)
        accuracy = (probs.argmax(axis=1) == labels).mean()
        assert accuracy >= 0.99

    def test_quality_monotonicity(self):
        labels = np.random.default_rng(4).integers(0, 4, 4000)
        accs = []
        for q in (0.5, 1.0, 2.0, 6.0):
            probs = gen_ordinal_scores(labels, 4, quality=q, seed=5)
            accs.append((probs.argmax(axis=1) == labels).mean())
        assert accs == sorted(accs)

    def test_rows_are_distributions(self):
        labels = np.random.default_rng(6).integers(0, 3, 500)
        probs = gen_ordinal_scores(labels, 3, quality=1.5, seed=7)
        assert (probs >= 0).all()
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_deterministic(self):
        labels = np.arange(5).repeat(10)
        a = gen_ordinal_scores(labels, 5, quality=2.0, seed=8)
        b = gen_ordinal_scores(labels, 5, quality=2.0, seed=8)
        assert (a == b).all()

    def test_range_errors(self):
        with pytest.raises(RangeError):
            gen_ordinal_scores([0, 1], 1, quality=1.0)
        with pytest.raises(RangeError):
            gen_ordinal_scores([0, 5], 3, quality=1.0)
        with pytest.raises(RangeError):
            gen_ordinal_scores([0, 1], 2, quality=-1.0)


class TestScoresForManifest:
    def _records(self, system=GradingSystem.RDR):
        spec = preset_population("table1-rdr", n_patients=100, seed=1)
        return gen_population(spec)

    def test_binary_requires_target(self):
        with pytest.raises(RangeError):
            scores_for_manifest(self._records(), GradingSystem.RDR, quality=1.0)

    def test_multiclass_requires_quality(self):
        with pytest.raises(RangeError):
            scores_for_manifest(self._records(), GradingSystem.PIRC, target_auc=0.9)

    def test_binary_scores_hit_target(self):
        records = gen_population(preset_population("table1-rdr",
                                                   n_patients=4000, seed=2))
        ss = scores_for_manifest(records, GradingSystem.RDR, target_auc=0.95, seed=3)
        labeled = dict((rec.image_id, lab.index)
                       for rec, lab in records_for_system(records, GradingSystem.RDR))
        labels = np.array([labeled[i] for i in ss.image_ids])
        got = empirical_auc(labels, ss.probs[:, 1])
        assert got == pytest.approx(0.95, abs=0.01)

    def test_canonical_order(self):
        records = self._records()
        ss = scores_for_manifest(records, GradingSystem.RDR, target_auc=0.9, seed=4)
        assert list(ss.image_ids) == sorted(ss.image_ids)


class TestGenFundusImage:
    def test_shape_and_dtype(self):
        img = gen_fundus_image(320, 240, 100, seed=0)
        assert img.shape == (240, 320, 3) and img.dtype == np.uint8

    def test_deterministic(self):
        a = gen_fundus_image(200, 180, 80, annotation=True, seed=5)
        b = gen_fundus_image(200, 180, 80, annotation=True, seed=5)
        assert (a == b).all()

    def test_disk_is_bright_background_black(self):
        img = gen_fundus_image(300, 260, 110, seed=6)
        cx, cy = 150, 130
        yy, xx = np.ogrid[:260, :300]
        disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= 110 ** 2
        luma = img.astype(float) @ np.array([0.299, 0.587, 0.114])
        assert (luma[disk] > 10).all()
        assert (luma[~disk & (yy > cy + 115)] == 0).all()

    def test_annotation_outside_bounding_square(self):
        img = gen_fundus_image(1000, 800, 390, annotation=True, seed=7)
        plain = gen_fundus_image(1000, 800, 390, annotation=False, seed=7)
        changed = np.nonzero((img != plain).any(axis=2))
        assert changed[0].size > 0
        assert changed[0].max() < 400 - 390  # above the disk square
        assert (img[changed].astype(float) @ np.array([0.299, 0.587, 0.114]) > 150).all()

    def test_brightness_scales(self):
        dim = gen_fundus_image(200, 200, 80, seed=8, brightness=0.7)
        bright = gen_fundus_image(200, 200, 80, seed=8, brightness=1.5)
        assert bright.astype(int).sum() > dim.astype(int).sum()

    def test_range_errors(self):
        with pytest.raises(RangeError):
            gen_fundus_image(100, 100, 60, seed=0)  # disk too big
        with pytest.raises(RangeError):
            gen_fundus_image(10, 100, 4, seed=0)
        with pytest.raises(RangeError):
            gen_fundus_image(200, 200, 99, annotation=True, seed=0)  # no border room
