"""合成语料生成"""

from src.datagen.synthetic import generate_corpus, joint_cell_probs

__all__ = ["generate_corpus", "joint_cell_probs"]
