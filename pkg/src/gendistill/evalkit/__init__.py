from .memorization import memorization_report
from .metrics import accuracy, confusion_matrix, summarize
from .report import RunReport
from .tfidf import TfidfIndex, TfidfVectorizer, build_tfidf, nearest_neighbors

_LAZY = ("multi_seed", "ablate_synthetic_count", "ablate_label_mode", "run_grid")


def __getattr__(name):
    # ablation imports the pipeline, which imports this package; defer it
    if name in _LAZY:
        from . import ablation
        return getattr(ablation, name)
    raise AttributeError(name)
