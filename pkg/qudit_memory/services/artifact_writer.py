import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from .. import __version__
from ..models.experiment import ExperimentConfig, RunManifest

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.12g"


def compute_run_id(command: str, config: ExperimentConfig, seed: int) -> str:
    """Stable hash of everything that determines a run's datasets."""
    digest = hashlib.sha256(f"{command}\n{config.canonical_json()}\n{seed}".encode())
    return digest.hexdigest()[:16]


def read_dataset(path: Union[str, Path]) -> pd.DataFrame:
    """Load a CSV written by ArtifactWriter, skipping its comment header."""
    return pd.read_csv(path, comment="#")


class ArtifactWriter:
    """Writes datasets into one output directory and records them in its manifest.

    Datasets contain nothing time-dependent, so identical inputs give identical files;
    only manifest.json carries a timestamp.
    """

    def __init__(self, out_dir: Union[str, Path], command: str, config: ExperimentConfig, seed: int):
        self.out_dir = Path(out_dir)
        self.command = command
        self.config = config
        self.seed = seed
        self.run_id = compute_run_id(command, config, seed)
        self.outputs: List[str] = []
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _register(self, path: Path) -> Path:
        self.outputs.append(path.name)
        logger.info(f"Wrote {path}", extra={"run_id": self.run_id})
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="") as f:
            f.write(f"# run_id={self.run_id} manifest={MANIFEST_NAME}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return self._register(path)

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.out_dir / name
        document = {"run_id": self.run_id, "manifest": MANIFEST_NAME, **payload}
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
        return self._register(path)

    def write_manifest(self) -> Path:
        manifest = RunManifest(
            command=self.command,
            run_id=self.run_id,
            version=__version__,
            seed=self.seed,
            timestamp=datetime.now(timezone.utc).isoformat(),
            config=self.config.model_dump(mode="json", by_alias=True),
            outputs=list(self.outputs),
        )
        path = self.out_dir / MANIFEST_NAME
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
        logger.info(f"Manifest written to {path}", extra={"run_id": self.run_id})
        return path
