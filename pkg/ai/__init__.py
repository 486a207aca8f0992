# ai/__init__.py
"""
Trainable models of the extraction pipeline.

Provides:
- TaggerModel: recurrent encoder + CRF tagger with auxiliary heads
- save_model / load_model: tagger checkpoint container
- train_tagger: SGD training loop with dev-based selection
- svm_train / svm_predict: multi-class RBF SVM solved by SMO
"""

from .tagger_model import TaggerModel
from .checkpoint import load_model, save_model
from .train_model import build_tagger, train_tagger
from .svm import SvmModel, svm_predict, svm_train

__all__ = [
    'TaggerModel',
    'load_model',
    'save_model',
    'build_tagger',
    'train_tagger',
    'SvmModel',
    'svm_predict',
    'svm_train',
]
