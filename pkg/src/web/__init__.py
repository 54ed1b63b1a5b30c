"""cdgraph Web 服务"""
