"""fauxcheck: evidence-based factuality prediction for image-claim pairs."""

from .corpus import Corpus, ImageClaimPair, Source, load_corpus, save_corpus, validate_corpus
from .ela import ElaResult, compute_ela
from .errors import (
    CacheMissError,
    ConfigError,
    CorpusError,
    DataError,
    ElaError,
    EmbeddingLookupError,
    ExternalServiceError,
    FauxcheckError,
)
from .evaluation import (
    Experiment,
    ProtocolKind,
    ProtocolSpec,
    accuracy,
    average_precision,
    run_protocol,
    topn_sweep,
)
from .evidence import (
    BundleCache,
    EvidenceBundle,
    Reliability,
    ReliabilityTable,
    WebPage,
    annotate_reliability,
    fetch_evidence,
    filter_fact_check_pages,
    lookup_reliability,
    prepare_bundle,
)
from .features import (
    ALL_GROUPS,
    FeatureConfig,
    FeatureGroup,
    GroupFeatures,
    extract_group,
    fit_extractor,
    fit_group,
)
from .model import (
    Ensemble,
    LinearModel,
    decision_value,
    predict,
    softmax_confidence,
    train_ensemble,
    train_linear_svm,
    weight_report,
)
from .text import (
    EmbeddingProvider,
    HashedEmbeddings,
    SparseVector,
    TableEmbeddings,
    Vocabulary,
    bow_vector,
    cosine,
    embedding_similarity,
    fit_vocabulary,
    registrable_domain,
    smoothed_average,
    tfidf_vector,
    tokenize,
)

__version__ = "0.1.0"
