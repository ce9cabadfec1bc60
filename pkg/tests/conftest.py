import numpy as np
import pytest

from causalwalk import CausalGraph, VectorTable
from causalwalk.env import Environment, GraphEmbedder, make_question
from causalwalk.infer import FixedEdgePolicy

# The pneumonia neighborhood excerpt used throughout the tests: nodes,
# edges, and the hand-assigned policy probabilities on the relevant edges.
FIG1_EDGES = [
    ("bacteria", "myocarditis"),
    ("bacteria", "organ failure"),
    ("bacteria", "pneumonia"),
    ("pneumonia", "sepsis"),
    ("pneumonia", "ards"),
    ("pneumonia", "hospitalization"),
    ("sepsis", "hypoglycemia"),
    ("sepsis", "organ failure"),
    ("sepsis", "kidney failure"),
    ("kidney failure", "anemia"),
    ("kidney failure", "bone pain"),
    ("anemia", "fatigue"),
    ("hospitalization", "infections"),
    ("myocarditis", "pericarditis"),
    ("myocarditis", "arrhythmia"),
    ("pericarditis", "pain"),
    ("ards", "death"),
    ("death", "grief"),
]

FIG1_PROBS = {
    ("pneumonia", "sepsis"): 0.6,
    ("pneumonia", "ards"): 0.25,
    ("pneumonia", "hospitalization"): 0.15,
    ("sepsis", "kidney failure"): 0.7,
    ("sepsis", "organ failure"): 0.2,
    ("sepsis", "hypoglycemia"): 0.1,
    ("kidney failure", "anemia"): 0.8,
    ("kidney failure", "bone pain"): 0.2,
    ("ards", "death"): 1.0,
    ("death", "grief"): 1.0,
}


def fig1_records():
    return [
        {"cause": c, "effect": e, "sentence": f"{c} can cause {e}.", "source_url": f"http://example.org/{c.replace(' ', '-')}"}
        for c, e in FIG1_EDGES
    ]


def random_vocab(tokens, dim, seed=0):
    rng = np.random.default_rng(seed)
    return VectorTable(dim=dim, vectors={t: rng.normal(size=dim) for t in tokens})


def vocab_for_graph(graph: CausalGraph, dim=8, seed=0, extra=()):
    tokens = set()
    for surface in graph.entities:
        tokens.update(surface.split())
    tokens.update(["does", "can", "cause", "causes"])
    tokens.update(extra)
    return random_vocab(sorted(tokens), dim, seed)


@pytest.fixture
def fig1_graph():
    return CausalGraph.from_records(fig1_records(), add_inverse=False)


@pytest.fixture
def fig1_embedder(fig1_graph):
    return GraphEmbedder(fig1_graph, vocab_for_graph(fig1_graph))


@pytest.fixture
def fig1_env(fig1_graph, fig1_embedder):
    return Environment(fig1_graph, fig1_embedder, T=3)


@pytest.fixture
def fig1_policy(fig1_graph):
    return FixedEdgePolicy(fig1_graph, FIG1_PROBS, stay_prob=0.0)


@pytest.fixture
def fig1_question(fig1_graph, fig1_embedder):
    return make_question(
        fig1_graph, fig1_embedder, "Does pneumonia cause anemia?", "pneumonia", "anemia"
    )
