"""Bitcoin realized-volatility forecasting toolkit.

Submodules: tensor (reverse-mode autodiff core), nn (layers, loss,
optimizer), models (TCN, dual-pipeline TCN, LSTM, GRU forecasters), econ
(AR-RV and GARCH baselines), ingest (tweet pipeline), vader (sentiment
scoring), features (returns, binning, scaling, windows), evaluation
(metrics and statistics), synth (dataset generator), experiment
(orchestration) and cli.
"""

__version__ = "0.1.0"
