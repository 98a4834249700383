"""Desk-scale workbench for demonstration-trained game agents.

Modules:
    core         states, actions, episodes, extended states
    quantize     multi-resolution uniform quantization schemes
    markov       stacked Markov ensembles, model sequences, telemetry
    style        n-gram distributions and the style distance
    arena        deterministic 2D arena with scripted behaviors
    progression  declarative progression models, A* plans, utility ES
    nn           small dense nets with hand-derived gradients
    distill      bootstrap dataset generation and policy distillation
    protocol     newline-delimited JSON wire records
    persist      versioned artifact documents
    server       session gateway (TCP + WebSocket)
    cli          command-line front end
"""

__version__ = "0.1.0"
