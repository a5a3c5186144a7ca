"""Realization, trial statistics, and the in-trial consistency audit."""

import numpy as np
import pytest

from helpers import random_density, random_resolution
from nchv.errors import DegenerateTargetError, NoCandidateError, ValidationError
from nchv.opcore import HermitianObservable
from nchv.povmfamily import ResolutionRegistry
from nchv.simulator import (
    MeasurementRequest,
    SimulationContext,
    TrialReport,
    born_probabilities,
    joint_probability,
    noncontextuality_audit,
    pvm_candidates,
    realize_povm,
    realize_pvm,
    run_noncontextuality_audit,
    run_trials,
    simulate_trial,
)
from nchv.pba import TruthValuation


def observable_on_member(family, member_pos, eigenvalues):
    """Hermitian operator whose eigenbasis is an exact family member."""
    b = family.members[member_pos].basis.mat
    return (b * np.array(eigenvalues)) @ b.conj().T


class TestRequestValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            MeasurementRequest("qnd", None, None, 0.1, 0, 1)

    def test_nonpositive_precision(self):
        with pytest.raises(ValidationError):
            MeasurementRequest.pvm(np.diag([1.0, 2.0]), 0.0)

    def test_povm_targets_must_resolve(self):
        with pytest.raises(ValidationError):
            MeasurementRequest.povm([np.eye(2), np.eye(2)], 0.1)


class TestProbabilities:
    def test_born_oracle(self):
        d = np.diag([0.5, 0.3, 0.2]).astype(complex)
        p = born_probabilities(d, [np.diag([1.0, 0, 0]), np.diag([0.0, 1, 1])])
        assert p == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_joint_of_commuting_projections(self):
        d = np.eye(2) / 2
        p = np.diag([1.0, 0.0])
        assert joint_probability(d, p, p) == pytest.approx(0.5, abs=1e-12)
        assert joint_probability(d, p, np.eye(2) - p) == pytest.approx(0.0, abs=1e-12)

    def test_joint_rejects_noncommuting(self):
        plus = np.full((2, 2), 0.5)
        with pytest.raises(ValidationError):
            joint_probability(np.eye(2) / 2, np.diag([1.0, 0.0]), plus)


class TestPvmRealization:
    def test_exact_member_is_single_tight_candidate(self, family10):
        h = observable_on_member(family10, 4, [1.0, 2.0, 3.0])
        obs = HermitianObservable.from_operator(h)
        cands, nearest = pvm_candidates(obs, family10, 1e-9)
        assert len(cands) == 1
        assert cands[0].member_index == family10.members[4].index
        assert nearest < 1e-12

    def test_loose_precision_admits_everyone(self, family10):
        h = observable_on_member(family10, 0, [1.0, 2.0, 3.0])
        obs = HermitianObservable.from_operator(h)
        cands, _ = pvm_candidates(obs, family10, 1.999)
        assert len(cands) == 10

    def test_label_to_atom_mapping_respects_eigenvalue_order(self, family10):
        # eigenvalues handed over unsorted; labels must still land on the
        # atoms carrying the matching eigenvectors
        h = observable_on_member(family10, 7, [5.0, -1.0, 2.0])
        obs = HermitianObservable.from_operator(h)
        cands, _ = pvm_candidates(obs, family10, 1e-9)
        real = cands[0]
        assert obs.eigenvalues == pytest.approx((-1.0, 2.0, 5.0))
        basis = family10.members[7].basis
        for label_pos, atom in enumerate(real.target_to_atom):
            proj = obs.projections[label_pos]
            v = basis.vector(atom)
            assert v.conj() @ proj @ v == pytest.approx(1.0, abs=1e-9)

    def test_no_candidate_reports_nearest(self, family10):
        obs = HermitianObservable.from_operator(np.diag([1.0, 2.0, 3.0]))
        req = MeasurementRequest.pvm(obs, 1e-8)
        with pytest.raises(NoCandidateError) as info:
            realize_pvm(req, family10, np.random.default_rng(0))
        assert info.value.nearest_distance > 1e-8

    def test_degenerate_target_rejected(self, family10):
        obs = HermitianObservable.from_operator(np.diag([1.0, 1.0, 3.0]))
        req = MeasurementRequest.pvm(obs, 0.5)
        with pytest.raises(DegenerateTargetError):
            realize_pvm(req, family10, np.random.default_rng(0))


class TestRunTrialsPvm:
    def test_seeded_runs_are_identical(self, family10):
        h = observable_on_member(family10, 2, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 0.5, apparatus_seed=7, system_seed=8)
        ctx = SimulationContext(np.eye(3) / 3, family=family10)
        a = run_trials(req, 2000, ctx)
        b = run_trials(req, 2000, ctx)
        assert a.counts == b.counts
        assert a.tv_distance == b.tv_distance

    def test_statistics_track_born(self, family10):
        rng = np.random.default_rng(23)
        d = random_density(3, rng)
        h = observable_on_member(family10, 6, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 1e-6, apparatus_seed=1, system_seed=2)
        rep = run_trials(req, 50000, SimulationContext(d, family=family10))
        assert rep.tv_distance < 0.01
        assert max(abs(z) for z in rep.z_scores) < 4.0

    def test_fixed_apparatus_uses_one_candidate(self, family10):
        h = observable_on_member(family10, 0, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 1.999, apparatus_seed=3, system_seed=4)
        ctx = SimulationContext(np.eye(3) / 3, family=family10, fixed_apparatus=True)
        rep = run_trials(req, 500, ctx, keep_samples=True)
        cand_ids, _ = rep.samples
        assert len(set(cand_ids.tolist())) == 1

    def test_fresh_apparatus_spreads_over_candidates(self, family10):
        h = observable_on_member(family10, 0, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 1.999, apparatus_seed=3, system_seed=4)
        ctx = SimulationContext(np.eye(3) / 3, family=family10)
        rep = run_trials(req, 500, ctx, keep_samples=True)
        cand_ids, _ = rep.samples
        assert len(set(cand_ids.tolist())) == 10

    def test_report_serialization(self, family10):
        h = observable_on_member(family10, 1, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 0.5, apparatus_seed=5, system_seed=6)
        rep = run_trials(req, 100, SimulationContext(np.eye(3) / 3, family=family10))
        payload = rep.to_json()
        assert payload["n_trials"] == 100
        assert sum(payload["counts"]) == 100
        csv_text = rep.to_csv()
        assert csv_text.splitlines()[0] == "label,count,empirical,born,z_score"
        assert len(csv_text.splitlines()) == 4

    def test_counts_must_sum(self):
        with pytest.raises(ValidationError):
            TrialReport("pvm", 10, (0, 1), (3, 4), (0.3, 0.4), (0.5, 0.5),
                        0.0, (0.0, 0.0), {})


class TestRunTrialsPovm:
    def test_miss_registers_then_hits(self):
        rng = np.random.default_rng(24)
        targets = random_resolution(2, 3, rng)
        reg = ResolutionRegistry(2)
        req = MeasurementRequest.povm(targets, 0.02, apparatus_seed=9, system_seed=10)
        ctx = SimulationContext(random_density(2, rng), registry=reg)
        run_trials(req, 1000, ctx)
        assert len(reg.entries) == 1
        run_trials(req, 1000, ctx)
        assert len(reg.entries) == 1

    def test_realized_members_stay_within_precision(self):
        rng = np.random.default_rng(25)
        targets = random_resolution(2, 2, rng)
        reg = ResolutionRegistry(2)
        req = MeasurementRequest.povm(targets, 0.05, apparatus_seed=11, system_seed=12)
        tagged = realize_povm(req, reg, np.random.default_rng(0))
        from nchv.opcore import operator_norm

        for t, m in zip(targets, tagged.members):
            assert operator_norm(t - m) < 0.05

    def test_statistics_track_realized_born(self):
        rng = np.random.default_rng(26)
        targets = random_resolution(2, 4, rng)
        reg = ResolutionRegistry(2)
        req = MeasurementRequest.povm(targets, 0.01, apparatus_seed=13, system_seed=14)
        d = random_density(2, rng)
        rep = run_trials(req, 50000, SimulationContext(d, registry=reg))
        assert rep.tv_distance < 0.01
        assert rep.labels == (0, 1, 2, 3)


class TestSingleTrial:
    def test_outcome_label_comes_from_spectrum(self, family10):
        h = observable_on_member(family10, 3, [2.0, 4.0, 8.0])
        req = MeasurementRequest.pvm(h, 1e-6)
        ctx = SimulationContext(np.eye(3) / 3, family=family10)
        out = simulate_trial(req, ctx, np.random.default_rng(1),
                             np.random.default_rng(2), trial_id=17)
        assert out.trial_id == 17
        assert min(abs(out.label - v) for v in (2.0, 4.0, 8.0)) < 1e-9
        assert out.realized_distance < 1e-9

    def test_povm_outcome_is_an_index(self):
        rng = np.random.default_rng(27)
        targets = random_resolution(2, 3, rng)
        req = MeasurementRequest.povm(targets, 0.05)
        ctx = SimulationContext(np.eye(2) / 2, registry=ResolutionRegistry(2))
        out = simulate_trial(req, ctx, np.random.default_rng(3), np.random.default_rng(4))
        assert out.label in (0, 1, 2)


class TestAudit:
    def test_single_valuation_consistent_across_partitions(self, pba10):
        val = TruthValuation(np.eye(3) / 3, np.random.default_rng(5))
        assert noncontextuality_audit(val, pba10.block(2)) == 0

    def test_run_returns_zero_violations(self, family10):
        h = observable_on_member(family10, 5, [1.0, 2.0, 3.0])
        req = MeasurementRequest.pvm(h, 0.5, apparatus_seed=15, system_seed=16)
        ctx = SimulationContext(np.eye(3) / 3, family=family10)
        assert run_noncontextuality_audit(req, ctx, 300) == 0

    def test_audit_is_pvm_only(self):
        rng = np.random.default_rng(28)
        targets = random_resolution(2, 2, rng)
        req = MeasurementRequest.povm(targets, 0.1)
        ctx = SimulationContext(np.eye(2) / 2, registry=ResolutionRegistry(2))
        with pytest.raises(ValidationError):
            run_noncontextuality_audit(req, ctx, 10)
