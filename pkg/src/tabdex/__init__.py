"""Generative table discovery: cluster tables into prefix-aware identifiers,
decode identifiers for natural-language queries under a trie constraint,
and grow the index batch by batch without disturbing what is already there.
"""

from .decoder import (
    AutoregressiveScorer,
    ScoredTabId,
    TabIdTrie,
    beam_search,
    search,
    tree_descent_scorer,
    trie_from,
)
from .embedding import (
    Embedder,
    EmbedderConfig,
    HashedBagEmbedder,
    RandomProjectionEmbedder,
    TwoViewEmbedding,
    dist,
    embed_table,
)
from .errors import (
    DuplicateTableError,
    RepositoryFormatError,
    TabdexError,
    UnknownTableError,
)
from .evaluation import (
    EvalQuery,
    PMatrix,
    average_performance,
    forgetting,
    learning_performance,
    mean_precision,
    precision_at_k,
    run_dynamic_scenario,
)
from .hub import CandidateList, MemoryHub, MemoryUnit
from .incremental import (
    CaseRecord,
    InsertionOutcome,
    closest_child,
    delete_table,
    estimate_radius,
    insert_table,
)
from .querygen import (
    QueryGenConfig,
    QueryGenerator,
    SyntheticQuery,
    TemplateQueryGenerator,
    build_query_pool,
    filter_queries,
    queries_for_table,
)
from .tables import (
    Repository,
    Table,
    ingest_repository,
    render_markdown,
    serialize_view1,
    serialize_view2,
    write_repository_jsonl,
)
from .tree import (
    ClusteringConfig,
    ClusterNode,
    SemanticTree,
    TabId,
    assign_tabids,
    build_tree,
    format_tabid,
    kmeans,
    node_stats,
    parse_tabid,
)

__version__ = "0.1.0"
