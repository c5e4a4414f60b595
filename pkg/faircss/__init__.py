"""
公平な列部分集合選択ツールキット

2グループ（A/B）に行分割された行列に対して、以下を提供します：
- レバレッジスコアに基づく公平サンプリング（FairScoresSampler）
- 公平なランク顕示QR（Fair High-/Low-RRQR）
- Greedy・Random・単一グループサンプラーなどのベースライン
- 2段階サンプリング
- 小規模問題向けの全探索オラクル
"""

__version__ = "0.4.0"
