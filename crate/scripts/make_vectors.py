"""Writes the bundled 10-dimensional toy word vectors.

Words in one cluster share a random center plus small noise, so synonyms
end up close together. Deterministic for a fixed seed.
"""
import random
import sys

CLUSTERS = [
    ["bring", "fetch", "get", "grab", "carry"],
    ["go", "navigate", "walk", "head", "move"],
    ["find", "locate", "look", "search", "seek"],
    ["follow", "tail", "accompany"],
    ["guide", "escort", "lead", "take"],
    ["count", "many", "number", "tell"],
    ["biggest", "largest", "smallest", "tiniest"],
    ["heaviest", "lightest", "red"],
    ["apple", "orange", "coke", "water", "juice", "sponge"],
    ["kitchen", "bedroom", "hallway", "bathroom", "fridge", "sink"],
    ["left", "right", "above", "under", "behind"],
]

def main(path, seed=13, dim=10):
    rng = random.Random(seed)
    words = [w for c in CLUSTERS for w in c]
    assert len(words) == len(set(words)) == 50, len(words)
    with open(path, "w") as f:
        for cluster in CLUSTERS:
            center = [rng.uniform(-1, 1) for _ in range(dim)]
            for w in cluster:
                v = [c + rng.gauss(0, 0.1) for c in center]
                f.write(w + " " + " ".join(f"{x:.4f}" for x in v) + "\n")

if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/vectors.txt")
