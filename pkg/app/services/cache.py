import hashlib
import os
from pathlib import Path
from typing import Optional

from app.config import settings
from app.logger import logger
from app.models.errors import InvalidInputError
from app.models.schemas import GroupSpec, SequenceSpec, Window
from app.services.balls import SumsetLayers, ball_service


def layers_key(spec: GroupSpec, sequence: SequenceSpec, window: Window) -> str:
    """Stable cache key from the canonical JSON of the three inputs"""
    material = "|".join([spec.model_dump_json(), sequence.model_dump_json(), window.model_dump_json()])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class LayerCache:
    """
    On-disk cache of built layers. Purely an optimization: a hit yields exactly
    the layers a fresh build would, and any unreadable entry is rebuilt.
    """

    def __init__(self, cache_dir: Optional[str] = None, enabled: Optional[bool] = None):
        self.cache_dir = Path(cache_dir or settings.CACHE_DIR)
        self.enabled = settings.CACHE_ENABLED if enabled is None else enabled

    def path_for(self, spec: GroupSpec, sequence: SequenceSpec, window: Window) -> Path:
        return self.cache_dir / f"{layers_key(spec, sequence, window)}.layers"

    def load(self, spec: GroupSpec, sequence: SequenceSpec, window: Window) -> Optional[SumsetLayers]:
        if not self.enabled:
            return None
        path = self.path_for(spec, sequence, window)
        if not path.exists():
            return None
        try:
            layers = SumsetLayers.from_text(path.read_text(encoding="utf-8"), spec, sequence, window)
            logger.info(f"[Cache] Hit {path.name[:12]}... ({len(layers)} elements)")
            return layers
        except (InvalidInputError, ValueError, IndexError, OSError) as e:
            logger.warning(f"[Cache] Discarding unreadable entry {path}: {e}")
            return None

    def store(self, layers: SumsetLayers) -> Optional[Path]:
        if not self.enabled:
            return None
        path = self.path_for(layers.spec, layers.sequence, layers.window)
        try:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".tmp{os.getpid()}")
            tmp.write_text(layers.to_text(), encoding="utf-8")
            os.replace(tmp, path)
            logger.info(f"[Cache] Stored {path.name[:12]}...")
            return path
        except OSError as e:
            logger.warning(f"[Cache] Could not write {path}: {e}")
            return None

    def get_or_build(self, spec: GroupSpec, sequence: SequenceSpec, window: Window) -> SumsetLayers:
        layers = self.load(spec, sequence, window)
        if layers is not None:
            return layers
        logger.info("[Cache] Miss, building layers")
        layers = ball_service.build_layers(spec, sequence, window)
        self.store(layers)
        return layers
