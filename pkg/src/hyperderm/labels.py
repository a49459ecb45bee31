"""Clinical label vocabularies shared by the simulator and the analysis code."""

import enum


class ClassLabel(str, enum.Enum):
    SKIN = "Skin"
    LESION = "Lesion"


class Pattern(str, enum.Enum):
    """Dermoscopic pattern of a melanocytic nevus."""

    DIFFUSE_RETICULAR = "DiffuseReticular"
    PERIPHERAL_NETWORK_CENTRAL_HYPOPIGMENTATION = "PeripheralNetworkCentralHypopigmentation"
    GLOBULAR = "Globular"
    FRIED_EGG = "FriedEgg"
    HOMOGENEOUS_BROWN = "HomogeneousBrown"


class Histology(str, enum.Enum):
    JUNCTIONAL = "Junctional"
    COMPOUND = "Compound"
    DERMAL = "Dermal"
