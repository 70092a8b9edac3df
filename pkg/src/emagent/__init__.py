"""emagent: routed question answering and analytics for emission data.

Subsystems: providers (chat/embedding backends with deterministic stubs),
corpus (chunking + entity normalization), retrieval (exact cosine top-k),
toolchain (validated function calling), inventory (aggregation + charts),
efrec (emission-factor recommendation), evalkit (metrics + aggregation),
agent (query routing), service (HTTP facade), cli.
"""

__version__ = "0.1.0"
