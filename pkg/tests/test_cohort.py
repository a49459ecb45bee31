from collections import Counter

import numpy as np
import pytest

from hyperderm.analysis import load_manifest, validate_manifest
from hyperderm.cohort import NEVUS_PANEL, CohortConfig, cohort_records, patient_skin
from hyperderm.errors import ConfigError
from hyperderm.hsc import load_cube


def test_plan_counts():
    plan = cohort_records(CohortConfig())
    assert len(plan) == 160
    assert sum(bool(s.lesions) for *_, s in plan) == 91
    assert len({s.meta.patient_id for *_, s in plan}) == 15


def test_patient_melanin_spread_is_monotone():
    cfg = CohortConfig()
    m = [patient_skin(cfg, p).melanin_fraction for p in range(cfg.patients)]
    assert np.all(np.diff(m) > 0)
    assert m[0] == pytest.approx(0.02 * 0.7) and m[-1] == pytest.approx(0.02 * 1.3)


@pytest.mark.parametrize("kw", [{"lesions": 200}, {"patients": 0}, {"rows": 5}, {"frames": 0}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        CohortConfig(**kw).validate()


def test_panel_labels_and_cubes(panel_manifest):
    m = load_manifest(panel_manifest)
    labels = [(r.annotation.histology, r.annotation.pattern) for r in m.records]
    assert labels == list(NEVUS_PANEL)
    assert all(r.lesion_present for r in m.records)
    cube = load_cube(m.path_of(m.records[0]))
    assert cube.shape == (16, 16, 51)
    assert validate_manifest(panel_manifest).ok
    assert Counter(r.patient_id for r in m.records) == Counter({f"P{i:02d}": 1 for i in range(1, 10)})
