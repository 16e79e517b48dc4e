"""ARIMA, LSTM and BiLSTM one-step forecasters with a walk-forward harness."""

__version__ = "0.1.0"
