"""exocast: exogenous-feature Bitcoin forecasting toolkit.

Merges minute-level market candles with daily epidemiological counts,
engineers higher-moment features, selects features via random-forest
importance and Pearson screening, and quantifies, through a windowed LSTM
ablation, whether the exogenous features improve next-day price
prediction.
"""

__version__ = "0.1.0"
