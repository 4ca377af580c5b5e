import math

import numpy as np
import pytest

from evometric.dataspace import DataSpace, VarSpec
from evometric.engine import EmpiricalEvolutionSequence
from evometric.errors import PreconditionError, StructuralError
from evometric.stats import error_analysis, reference_means


def sequence_from(samples: np.ndarray) -> EmpiricalEvolutionSequence:
    """(N, k+1) samples of a single variable 'x'."""
    space = DataSpace([VarSpec("x", -1e9, 1e9)])
    return EmpiricalEvolutionSequence(space, samples[:, :, None], (0, 0))


class TestErrorAnalysis:
    def test_constant_samples(self):
        E = sequence_from(np.full((5, 3), 7.0))
        rep = error_analysis(E, ["x"], {"x": [7.0, 7.0, 7.0]})
        row = rep.row("x", 1)
        assert row["mean"] == 7.0 and row["std"] == 0.0 and row["stderr"] == 0.0
        assert math.isnan(row["z"])

    def test_two_sample_hand_values(self):
        # samples {1, 3}: mean 2, std sqrt(((1-2)^2 + (3-2)^2)/1) = sqrt(2),
        # stderr sqrt(2)/sqrt(2) = 1
        E = sequence_from(np.array([[1.0], [3.0]]))
        rep = error_analysis(E, ["x"], {"x": [0.0]})
        row = rep.row("x", 0)
        assert row["mean"] == 2.0
        assert row["std"] == pytest.approx(math.sqrt(2.0), abs=0)
        assert row["stderr"] == pytest.approx(1.0, abs=0)
        assert row["z"] == pytest.approx(2.0)

    def test_shift_invariance(self):
        r = np.random.Generator(np.random.PCG64(3))
        base = r.normal(0, 1, size=(40, 4))
        ref = {"x": np.zeros(4)}
        a = error_analysis(sequence_from(base), ["x"], ref)
        b = error_analysis(sequence_from(base + 5.0), ["x"], ref)
        assert np.allclose(b.mean, a.mean + 5.0)
        assert np.allclose(a.std, b.std, rtol=1e-12)
        assert np.allclose(a.stderr, b.stderr, rtol=1e-12)

    def test_scale_covariance(self):
        r = np.random.Generator(np.random.PCG64(4))
        base = r.normal(1, 2, size=(30, 3))
        ref = {"x": np.zeros(3)}
        a = error_analysis(sequence_from(base), ["x"], ref)
        b = error_analysis(sequence_from(3.0 * base), ["x"], ref)
        assert np.allclose(b.mean, 3.0 * a.mean)
        assert np.allclose(b.std, 3.0 * a.std)
        assert np.allclose(b.stderr, 3.0 * a.stderr)

    def test_needs_two_runs(self):
        E = sequence_from(np.ones((1, 2)))
        with pytest.raises(PreconditionError):
            error_analysis(E, ["x"], {"x": [0.0, 0.0]})

    def test_reference_length_checked(self):
        E = sequence_from(np.ones((3, 2)))
        with pytest.raises(StructuralError):
            error_analysis(E, ["x"], {"x": [0.0]})

    def test_reference_means_helper(self):
        E = sequence_from(np.array([[1.0, 2.0], [3.0, 4.0]]))
        ref = reference_means(E, ["x"])
        assert np.array_equal(ref["x"], np.array([2.0, 3.0]))

    def test_z_within(self):
        E = sequence_from(np.array([[0.0, 0.0], [2.0, 2.0]]))
        rep = error_analysis(E, ["x"], {"x": [1.0, 100.0]})
        frac = rep.z_within(1.96)
        assert frac["x"] == 0.5

    def test_csv_format(self, tmp_path):
        E = sequence_from(np.array([[1.0], [1.0]]))
        rep = error_analysis(E, ["x"], {"x": [1.0]})
        path = tmp_path / "stats.csv"
        rep.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[1] == "variable,step,mean,std,stderr,z"
        # zero stderr: z column is empty
        assert lines[2].endswith(",")
