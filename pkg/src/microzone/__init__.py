"""Micro-transit zone design: enumerate diameter-bounded convex candidate
zones over a demand-annotated road graph, then pick the best m of them by
solving a weighted maximum coverage problem exactly.

Typical flow::

    inst = microzone.synth.generate(SynthParams(n=50, seed=7, max_diameter=2.0, num_zones=4))
    cliques = microzone.cliquegen.clique_gen(inst)
    model = microzone.coverage.build_model(inst, cliques)
    best = microzone.coverage.solve_exact(model)
"""

from microzone import baseline, cliquegen, coverage, geometry, ingest, instance, report, synth

__all__ = [
    "baseline",
    "cliquegen",
    "coverage",
    "geometry",
    "ingest",
    "instance",
    "report",
    "synth",
]

__version__ = "0.1.0"
