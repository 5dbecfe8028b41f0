from .baselines import LinearSVM, baseline_fasttext_style, baseline_tfidf_linear
from .models import (
    BagConfig,
    BagOfEmbeddings,
    Batch,
    KimCNN,
    KimStudentConfig,
    ResMLP,
    ResStudentConfig,
    build_student,
    make_batch,
)
from .teacher import Teacher, TeacherConfig, predict_hard, predict_soft, train_teacher
from .training import (TrainConfig, TrainingDiverged, argmax_lowest, predict_logits, predict_proba,
                       train_classifier)
