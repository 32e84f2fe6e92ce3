"""deltabench - statistical hedging models versus HedgeNet under one-period MSHE."""
