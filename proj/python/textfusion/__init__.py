"""Multi-modal scene-text + visual fine-grained classifier.

Thin python surface over the C++ core: word-embedding text features,
bilinear semantic attention pooling, batch-normalized fusion with
multi-supervision training, and AP/mAP evaluation for classification and
cosine-similarity retrieval.
"""

from ._core import (
    DatasetManifest,
    EmbeddingTable,
    EvalReport,
    LossHistoryRow,
    Model,
    ModelConfig,
    SpottedWord,
    TextFeature,
    TrainConfig,
    TrainResult,
    attention_forward,
    average_pool,
    average_precision,
    build_text_feature,
    classification_map,
    cosine,
    evaluate_classification,
    evaluate_retrieval,
    filter_words,
    fixture_embedding_table,
    gradcheck_model,
    load_checkpoint,
    load_embeddings,
    load_manifest,
    lr_at,
    masked_softmax,
    predict_split,
    retrieval_map,
    softmax_xent,
    synth_noisy_words,
    synth_overfit,
    synth_text_only,
    train,
    write_fixture_embeddings,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
