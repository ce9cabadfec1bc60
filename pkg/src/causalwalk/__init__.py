"""causalwalk: binary causal question answering over a causality graph.

A reinforcement-learning walker (actor-critic with supervised
bootstrapping from BFS demonstrations) searches the graph for cause→effect
paths; an exhaustive BFS serves as the baseline it is compared against.
Every answer comes with evidence paths whose edges carry the original
sentence and source URL.
"""

from .agent import AgentConfig, AgentParams, init_params, load_checkpoint, save_checkpoint
from .data import CueLexicon, QAExample, extract_questions, filter_training_set
from .embed import VectorTable, embed_phrase, load_word_vectors
from .env import Environment, GraphEmbedder, Question, make_question
from .evaluation import Confusion, MetricsRow, run_eval, score
from .graph import CausalGraph, bfs_answer, bfs_shortest_path, link, load_graph, neighbors
from .infer import Answer, BeamResult, ScoredPath, answer, beam_search, greedy_path
from .train import Demonstration, compute_gae, generate_demonstrations, train_loop

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "AgentParams",
    "Answer",
    "BeamResult",
    "CausalGraph",
    "Confusion",
    "CueLexicon",
    "Demonstration",
    "Environment",
    "GraphEmbedder",
    "MetricsRow",
    "QAExample",
    "Question",
    "ScoredPath",
    "VectorTable",
    "answer",
    "beam_search",
    "bfs_answer",
    "bfs_shortest_path",
    "compute_gae",
    "embed_phrase",
    "extract_questions",
    "filter_training_set",
    "generate_demonstrations",
    "greedy_path",
    "init_params",
    "link",
    "load_checkpoint",
    "load_graph",
    "load_word_vectors",
    "make_question",
    "neighbors",
    "run_eval",
    "save_checkpoint",
    "score",
    "train_loop",
    "__version__",
]
