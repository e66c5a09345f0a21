"""Joint liver-tumor segmentation and detection on synthetic multi-modality
MRI phantoms, trained adversarially against a radiomics-guided discriminator."""

__version__ = "0.1.0"

from .boxes import BoxTuple
from .phantom import CorpusSpec, Sample, generate_corpus
from .config import TrainConfig

__all__ = ["BoxTuple", "CorpusSpec", "Sample", "generate_corpus", "TrainConfig", "__version__"]
