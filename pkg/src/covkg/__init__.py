"""covkg: typed weighted knowledge graphs from social-media corpora.

The package builds a knowledge graph out of a tweet corpus plus external
event and statistics feeds, and analyzes it with topic modeling, aspect
sentiment, changepoint detection, a translational embedding with numeric
edge weights, link prediction, and community detection.
"""

from .analysis import (
    CommunityRow,
    Partition,
    PredictedLink,
    community_report,
    louvain,
    modularity,
    predict_links,
)
from .embedding import (
    EmbeddingParams,
    EpochTrace,
    SamplerStats,
    TransDModel,
    batch_gradients,
    batch_loss,
    focus_alpha,
    init_model,
    load_model,
    project,
    sample_negative,
    sampler_stats,
    save_model,
    score_f,
    score_g,
    score_h,
    train,
    triple_distance,
)
from .errors import CovkgError, DataError, GraphError, StageError
from .graph_store import (
    RELATION_SIGNATURES,
    WEIGHTED_RELATIONS,
    DateAttrs,
    EntityKind,
    EntityRef,
    Fact,
    KnowledgeGraph,
    RelationType,
    export_entity_attrs,
    export_triples,
    import_triples,
)
from .kg_builder import (
    BuildConfig,
    BuildReport,
    EventRecord,
    build,
    load_date_stats,
    load_events,
)
from .sentiment import (
    Clause,
    aspect_scores,
    demo_lexicon,
    load_lexicon,
    score_text,
    split_clauses,
)
from .timeseries_cpd import (
    ChangePointSet,
    DailySeries,
    changepoint_dates,
    daily_mean,
    detect_peaks,
    pelt,
    rolling_mean,
    segmentation_cost,
    tune_penalty,
)
from .topics import (
    NmfModel,
    Vocabulary,
    assign_topics,
    build_tfidf,
    build_vocabulary,
    load_nmf,
    load_vocabulary,
    nmf_fit,
    save_nmf,
    save_vocabulary,
    topic_keywords,
)
from .tweet_ingest import (
    CleanedTweet,
    RawTweet,
    clean_text,
    clean_tweets,
    default_lemma_exceptions,
    default_stopwords,
    filter_corpus,
    lemmatize,
    load_keywords,
    load_stopwords,
    matches_keywords,
    parse_tweets,
)
from .wordvec import WordVectors, best_keyword_link, cosine, load_vectors

__version__ = "0.1.0"
