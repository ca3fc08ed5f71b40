import json
import logging
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

from invofactor.algebra import get_field
from invofactor.core.config import settings
from invofactor.core.errors import MalformedInput
from invofactor.core.normalization import PolyParser
from invofactor.glsearch import CensusResult, census

logger = logging.getLogger(__name__)

MAGIC = b"IFCN"
VERSION = 1


class CensusService:
    """Runs censuses of products in GL_n(F_q) and stores them as IFCN files."""

    def __init__(self, directory: Optional[Union[str, Path]] = None, budget: Optional[int] = None):
        self.directory = Path(settings.CENSUS_DIR if directory is None else directory)
        self.budget = settings.INVOFACTOR_BUDGET if budget is None else budget

    def run(self, n: int, q: int, k: int, poly: str) -> CensusResult:
        p = PolyParser.parse_poly(poly, get_field(f"F{q}"))
        return census(n, q, k, p, budget=self.budget)

    def path_for(self, result: CensusResult) -> Path:
        return self.directory / f"census_n{result.n}_q{result.q}_k{result.k}.ifcn"

    def write(self, result: CensusResult, path: Optional[Union[str, Path]] = None) -> Path:
        """
        Layout: magic, u16 version, u32 header length, JSON header, then one
        little-endian u64 per member (matrices packed base q).
        """
        path = Path(path) if path is not None else self.path_for(result)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = dict(result.header(), witness_table=False)
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<HI", VERSION, len(blob)))
            fh.write(blob)
            for member in result.members:
                fh.write(struct.pack("<Q", member))
        logger.info(f"Census written to {path} ({result.total} members)")
        return path

    @staticmethod
    def read(path: Union[str, Path]) -> Tuple[dict, list]:
        data = Path(path).read_bytes()
        if data[:4] != MAGIC:
            raise MalformedInput(f"{path} is not a census file")
        version, size = struct.unpack_from("<HI", data, 4)
        if version != VERSION:
            raise MalformedInput(f"unsupported census version {version}")
        start = 4 + struct.calcsize("<HI")
        header = json.loads(data[start:start + size].decode("utf-8"))
        body = data[start + size:]
        if len(body) % 8:
            raise MalformedInput(f"{path} has a truncated member table")
        members = [m for (m,) in struct.iter_unpack("<Q", body)]
        if len(members) != header.get("total"):
            raise MalformedInput(f"{path} declares {header.get('total')} members but stores {len(members)}")
        return header, members

    def run_and_store(self, n: int, q: int, k: int, poly: str) -> Path:
        try:
            return self.write(self.run(n, q, k, poly))
        except Exception as e:
            logger.error(f"Census n={n} q={q} k={k} failed: {e}")
            raise
