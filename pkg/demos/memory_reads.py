"""Category memories: what the two reads return and what a write does.

Run: python demos/memory_reads.py
"""

import numpy as np

from memflow.autodiff import Tensor
from memflow.memory import BilinearForm, entity_write_grad, init_memory, normal_attention, read_inverse, write

rng = np.random.default_rng(0)
names = ["None", "PER", "ORG", "LOC"]
mem = init_memory(len(names), 6, rng, "entity", names)
mem.slots.data *= 50  # spread the slots out so the attention is readable
form = BilinearForm.create("demo", 5, 6, rng, "mfa")
words = Tensor(rng.normal(size=(4, 5)))

# normal read: each word distributes one unit of attention over the categories
att = normal_attention(words, mem, form).data
print("normal read, word x category (rows sum to 1)")
print(np.round(att, 3))

# inverse read: each category distributes one unit over the words; summed per word
weights, scaled = read_inverse(words, mem, form)
print("\ninverse-read weight per word:", np.round(weights.data, 3), "sum =", weights.data.sum())

# a true-class write pulls the slot toward the projected instance
x = words.data[0]
gold = 2
probs = att[0]
before = x @ form.weight.data @ mem.slots.data[gold]
write(mem, x, form, entity_write_grad(probs, np.array([gold]))[0], lr=0.1)
after = x @ form.weight.data @ mem.slots.data[gold]
print(f"\nscore of word 0 against {names[gold]}: {before:.4f} -> {after:.4f} (p = {probs[gold]:.3f})")
