"""contextdb: a graph database engine over DAG schemas of total functions.

Schemas are labeled DAGs whose edges denote total functions between finite
data sets; queries combine edges with restriction, composition, pairing and
product. Traversal queries induce keyed relations; analytic queries aggregate
a measure over the groups a grouping query induces.
"""

from . import _kernels
from .algebra import (
    EvaluatedFunction,
    eval_expression,
    extensionally_equal,
    implied_closure_step,
    push_restrictions,
)
from .analytic import (
    AGGREGATES,
    AnalyticAnswer,
    combine_answers,
    evaluate_analytic,
    evaluate_pairing_plan,
    evaluate_plan,
    make_analytic,
    restrict_answer,
    rewrite_composition,
    rewrite_pairing,
)
from .constraints import (
    Equality,
    Refinement,
    check_all,
    check_equality,
    check_refinement,
    refinement_witness,
)
from .context import (
    Context,
    DomainSpec,
    Edge,
    EdgeKind,
    NodeRef,
    TERMINAL,
    ValidationReport,
    coalesce_cycles,
    join_contexts,
    validate_context,
)
from .database import (
    DatabaseInstance,
    FiniteFunction,
    Partition,
    instance_from_maps,
    partition_of,
    preimage,
    validate_instance,
)
from .expr import (
    AnalyticQueryAst,
    Expression,
    TraversalQueryAst,
    source,
    target,
    to_text,
    typecheck,
)
from .parser import parse_analytic, parse_expression, parse_traversal
from .proposals import Proposal, enumerate_proposals
from .relational import (
    BackingMap,
    RelationalViewDef,
    emit_sql,
    export_database,
    ingest_relation,
    instance_from_ingests,
)
from .rewrite import (
    ResultCache,
    RewriteTrace,
    RULES,
    apply_rule,
    check_equivalence,
    eval_with_cache,
    rewrite_for_cache,
)
from .traversal import (
    Relation,
    RelationSchema,
    TraversalAnswer,
    answer,
    compose_queries,
    induced_relation,
    is_tree,
    pair_queries,
    restrict_query,
    split_product_targets,
)
from .values import UNIT
from .views import View, answer_over_view, is_stale, materialize, unfold

KERNEL_BACKEND = _kernels.BACKEND

__version__ = "0.1.0"
