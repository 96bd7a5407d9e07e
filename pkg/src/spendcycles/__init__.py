"""Turn raw purchase logs into weekly series, cluster them, and report on
customer lifecycle stages.

The package is organised as a pipeline: ``ingest`` builds a weekly series
matrix, ``distances`` computes pairwise dissimilarities under ten measures,
``clustering`` partitions the series, ``validity`` scores and selects the
best scheme, ``embed`` projects the population to 2-D, ``motif`` mines
repeated segments from cluster centroids, ``forecast`` fits ARIMA models,
and ``lifecycle`` classifies each cluster into a stage and renders the
marketing report.  ``cli`` wires the steps into subcommands.
"""

__version__ = "0.1.0"
