import hashlib
from pathlib import Path


def derive_seed(seed: int, *keys: str | int) -> int:
    """
    Mix a base seed with identifying keys into a new 64-bit seed
    seed: base seed of the run
    keys: e.g. sample id, split name, epoch
    return: 64-bit unsigned seed, stable across platforms
    """
    raw_data = "|".join([str(seed), *(str(k) for k in keys)])
    digest = hashlib.sha256(raw_data.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def file_digest(path: str | Path) -> str:
    """
    SHA-256 of a file's bytes
    path: file to hash
    return: hex digest
    """
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
