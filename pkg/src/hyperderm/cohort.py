"""Synthetic annotated cohorts built end to end through the simulator.

Every record is rendered as a raw snapshot, calibrated against one shared
dark/white reference pair and stored as a reflectance cube, exactly as a
measured capture would be.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import AnnotatedRecord, PointAnnotation, save_manifest
from .calib import ReferencePair, compute_reflectance
from .cube import BodyPart, CaptureMeta
from .hsc import save_cube
from .labels import ClassLabel, Histology, Pattern
from .skinsim.optics import SkinOpticsParams
from .skinsim.scene import Lesion, PhantomScene, Renderer, render_references

COHORT_RECORDS = 160
COHORT_LESIONS = 91
COHORT_PATIENTS = 15

# Nine labelled nevi as (histology, dermoscopic pattern).
NEVUS_PANEL = (
    (Histology.COMPOUND, Pattern.FRIED_EGG),
    (Histology.JUNCTIONAL, Pattern.PERIPHERAL_NETWORK_CENTRAL_HYPOPIGMENTATION),
    (Histology.JUNCTIONAL, Pattern.DIFFUSE_RETICULAR),
    (Histology.COMPOUND, Pattern.GLOBULAR),
    (Histology.JUNCTIONAL, Pattern.DIFFUSE_RETICULAR),
    (Histology.JUNCTIONAL, Pattern.HOMOGENEOUS_BROWN),
    (Histology.DERMAL, Pattern.HOMOGENEOUS_BROWN),
    (Histology.DERMAL, Pattern.HOMOGENEOUS_BROWN),
    (Histology.JUNCTIONAL, Pattern.DIFFUSE_RETICULAR),
)

_BODY_PARTS = (BodyPart.ARMS, BodyPart.LEGS, BodyPart.TORSO, BodyPart.FACE, BodyPart.NECK,
               BodyPart.HANDS, BodyPart.ABDOMEN)


@dataclass(frozen=True)
class CohortConfig:
    records: int = COHORT_RECORDS
    lesions: int = COHORT_LESIONS
    patients: int = COHORT_PATIENTS
    rows: int = 24
    cols: int = 24
    frames: int = 100
    noise: bool = True
    seed: int = 0
    skin_melanin: float = 0.02
    lesion_melanin: float = 0.2
    patient_melanin_spread: float = 0.6  # relative offset range across patients

    def validate(self):
        from .errors import ConfigError

        if not 0 <= self.lesions <= self.records:
            raise ConfigError("lesion count must lie between 0 and the record count")
        if self.patients < 1 or self.records < 1:
            raise ConfigError("need at least one patient and one record")
        if min(self.rows, self.cols) < 9:
            raise ConfigError("cohort frames must be at least 9x9 pixels")
        if self.frames < 1:
            raise ConfigError("need at least one reference frame")


def patient_skin(cfg: CohortConfig, patient: int) -> SkinOpticsParams:
    """Background skin of one patient; melanin and blood drift between patients."""
    t = patient / max(cfg.patients - 1, 1) - 0.5
    return SkinOpticsParams(
        melanin_fraction=cfg.skin_melanin * (1.0 + cfg.patient_melanin_spread * t),
        blood_fraction=0.02 * (1.0 + 0.3 * np.sin(1.7 * patient)),
        oxygenation=0.7,
        water_fraction=0.65,
    )


def cohort_records(cfg: CohortConfig):
    """Plan of the cohort: ``(record_id, patient, body_part, scene)`` tuples.

    The first ``cfg.lesions`` records carry a lesion; their labels cycle
    through ``NEVUS_PANEL``.
    """
    cfg.validate()
    plan = []
    center = ((cfg.rows - 1) / 2, (cfg.cols - 1) / 2)
    radius = 0.3 * min(cfg.rows, cfg.cols)
    for i in range(cfg.records):
        patient = i % cfg.patients
        body = _BODY_PARTS[(i // cfg.patients) % len(_BODY_PARTS)]
        skin = patient_skin(cfg, patient)
        lesions = []
        if i < cfg.lesions:
            histology, pattern = NEVUS_PANEL[i % len(NEVUS_PANEL)]
            les_params = skin.replace(melanin_fraction=cfg.lesion_melanin)
            lesions.append(Lesion(center, radius, les_params, pattern=pattern, histology=histology))
        meta = CaptureMeta(patient_id=f"P{patient + 1:02d}", body_part=body,
                           timestamp=f"2024-01-{1 + i // 24:02d}T{8 + (i % 24) // 2:02d}:{(i % 2) * 30:02d}:00")
        plan.append((f"rec_{i:03d}", patient, body, PhantomScene(cfg.rows, cfg.cols, skin, lesions, meta)))
    return plan


def build_cohort(out_dir, cfg: CohortConfig | None = None, renderer: Renderer | None = None):
    """Render, calibrate and write a cohort; returns the manifest path.

    Layout: ``references/{dark,white}.hsc``, ``cubes/<record>.hsc`` and
    ``manifest.jsonl`` with paths relative to ``out_dir``.
    """
    cfg = cfg or CohortConfig()
    plan = cohort_records(cfg)
    out = Path(out_dir)
    ren = renderer or Renderer()
    ref_meta = CaptureMeta(timestamp="2024-01-01T07:55:00")
    dark, white = render_references(cfg.rows, cfg.cols, ren.sensor, ren.light, cfg.frames,
                                    cfg.noise, cfg.seed, ref_meta)
    save_cube(dark, out / "references" / "dark.hsc")
    save_cube(white, out / "references" / "white.hsc")
    refs = ReferencePair.from_cubes(dark, white)

    records = []
    ann_x, ann_y = (cfg.cols - 1) // 2, (cfg.rows - 1) // 2
    for i, (rid, patient, body, scene) in enumerate(plan):
        raw, _ = ren.render(scene, cfg.noise, cfg.seed, frame=i)
        refl, _ = compute_reflectance(raw, refs)
        rel = f"cubes/{rid}.hsc"
        save_cube(refl, out / rel)
        if scene.lesions:
            les = scene.lesions[0]
            ann = PointAnnotation(ann_x, ann_y, ClassLabel.LESION, les.pattern, les.histology)
        else:
            ann = PointAnnotation(ann_x, ann_y, ClassLabel.SKIN)
        records.append(AnnotatedRecord(rid, rel, ann, scene.meta.patient_id, body, bool(scene.lesions)))
    manifest = out / "manifest.jsonl"
    save_manifest(manifest, records)
    return manifest


def nevus_panel_config(**overrides) -> CohortConfig:
    """Nine lesion-only records labelled exactly as ``NEVUS_PANEL``."""
    n = len(NEVUS_PANEL)
    return CohortConfig(**{"records": n, "lesions": n, "patients": n, **overrides})
