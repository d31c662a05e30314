"""Isomorphism-reduced bookkeeping for small databases with distinguished tuples"""

import itertools
import logging
from typing import Dict, Iterator, List, Sequence, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from models.query import Database, Fact, Schema, fresh_names

logger = logging.getLogger(__name__)

_NODE_MATCH = isomorphism.categorical_node_match('label', None)
_EDGE_MATCH = isomorphism.categorical_edge_match('pos', None)


def structure_graph(db: Database, answer: Sequence[str] = ()) -> nx.DiGraph:
    """
    Encode a database as a labelled digraph

    Each fact becomes a node labelled by its relation with edges to its
    arguments labelled by argument positions. Constants are labelled by the
    positions they take in the distinguished tuple.
    """
    graph = nx.DiGraph()
    for constant in db.adom | set(answer):
        positions = [str(i) for i, a in enumerate(answer) if a == constant]
        graph.add_node(('c', constant), label='const:' + ','.join(positions))
    for number, fact in enumerate(db.sorted_facts()):
        node = ('f', number)
        graph.add_node(node, label=f"rel:{fact.relation}/{fact.arity}")
        positions: Dict[str, List[str]] = {}
        for index, constant in enumerate(fact.args):
            positions.setdefault(constant, []).append(str(index))
        for constant, where in positions.items():
            graph.add_edge(node, ('c', constant), pos=','.join(where))
    return graph


class StructureIndex:
    """Remembers structures up to isomorphism"""

    def __init__(self):
        self._buckets: Dict[Tuple[str, int, int], List[nx.DiGraph]] = {}
        self.size = 0

    def add(self, db: Database, answer: Sequence[str] = ()) -> bool:
        """
        Record a structure

        Returns:
            True if no isomorphic structure was recorded before
        """
        graph = structure_graph(db, answer)
        key = (nx.weisfeiler_lehman_graph_hash(graph, node_attr='label', edge_attr='pos'),
               graph.number_of_nodes(), graph.number_of_edges())
        bucket = self._buckets.setdefault(key, [])
        for other in bucket:
            if nx.is_isomorphic(graph, other, node_match=_NODE_MATCH, edge_match=_EDGE_MATCH):
                return False
        bucket.append(graph)
        self.size += 1
        return True


def are_isomorphic(d1: Database, d2: Database, a1: Sequence[str] = (), a2: Sequence[str] = ()) -> bool:
    return nx.is_isomorphic(structure_graph(d1, a1), structure_graph(d2, a2),
                            node_match=_NODE_MATCH, edge_match=_EDGE_MATCH)


def _candidate_facts(schema: Schema, constants: Sequence[str], fresh: Sequence[str]) -> List[Fact]:
    """Facts over known constants plus a canonical prefix of fresh ones"""
    found = []
    for name, arity in schema.relations:
        for n_new in range(0, min(arity, len(fresh)) + 1):
            pool = list(constants) + list(fresh[:n_new])
            for args in itertools.product(pool, repeat=arity):
                # every fresh constant used, first occurrences in canonical order
                used = [a for a in dict.fromkeys(args) if a in fresh]
                if used == list(fresh[:n_new]):
                    found.append(Fact(name, args))
    return found


def enumerate_databases(schema: Schema, max_domain: int, max_facts: int,
                        prefix: str = 'c') -> Iterator[Database]:
    """
    Yield every database over the schema up to isomorphism, smallest first

    Databases are grown one fact at a time; each level is reduced with a
    StructureIndex so that no two yielded databases are isomorphic.

    Args:
        schema: Relations to use
        max_domain: Largest active domain
        max_facts: Largest number of facts
        prefix: Constants are named prefix1, prefix2, ...
    """
    level = [Database()]
    yield level[0]
    for size in range(1, max_facts + 1):
        index = StructureIndex()
        following = []
        for db in level:
            constants = sorted(db.adom, key=lambda c: (len(c), c))
            fresh = fresh_names(prefix, max(max_domain - len(constants), 0), constants,
                                start=len(constants) + 1)
            for fact in _candidate_facts(schema, constants, fresh):
                if fact in db.facts:
                    continue
                grown = Database(db.facts | {fact})
                if len(grown.adom) <= max_domain and index.add(grown):
                    following.append(grown)
        logger.debug("level %d: %d databases", size, len(following))
        if not following:
            return
        yield from following
        level = following
