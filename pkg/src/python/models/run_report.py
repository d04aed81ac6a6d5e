import json
from typing import Any, Dict, List, Sequence

from pydantic import BaseModel, Field, model_validator


class RunReport(BaseModel):
    """One benchmark row; JSON-lines output keeps this field order."""

    method: str = Field(description="Compressor name (ifs, ae, vq)")
    original_bytes: int = Field(ge=0, description="Size of the packed input bit raster")
    compressed_bytes: int = Field(gt=0, description="Size of the written container file")
    ratio: float = Field(description="original_bytes / compressed_bytes")
    metric: str = Field(description="Distance metric used for the distortion")
    distortion: float = Field(ge=0.0, description="Distance between input and decoded image")
    wall_time: float = Field(ge=0.0, description="Encode + decode seconds")
    seed: int = Field(description="Seed the run was started from")
    config: Dict[str, Any] = Field(default_factory=dict, description="Compressor parameters echo")

    @model_validator(mode="after")
    def _check_ratio(self) -> "RunReport":
        expected = self.original_bytes / self.compressed_bytes
        if abs(self.ratio - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError(f"ratio {self.ratio} does not equal {self.original_bytes}/{self.compressed_bytes}")
        return self

    @classmethod
    def build(cls, method: str, original_bytes: int, compressed_bytes: int, **fields) -> "RunReport":
        return cls(
            method=method,
            original_bytes=original_bytes,
            compressed_bytes=compressed_bytes,
            ratio=original_bytes / compressed_bytes,
            **fields,
        )

    def to_jsonl(self) -> str:
        return self.model_dump_json()


TABLE_COLUMNS = ("method", "original_bytes", "compressed_bytes", "ratio", "metric", "distortion", "wall_time", "seed")


def format_table(reports: Sequence[RunReport]) -> str:
    """Fixed-width text table; the config echo is left to the JSON-lines form."""
    rows: List[List[str]] = [list(TABLE_COLUMNS)]
    for report in reports:
        rows.append([
            report.method,
            str(report.original_bytes),
            str(report.compressed_bytes),
            f"{report.ratio:.4f}",
            report.metric,
            f"{report.distortion:.6f}",
            f"{report.wall_time:.3f}",
            str(report.seed),
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def format_jsonl(reports: Sequence[RunReport]) -> str:
    return "".join(report.to_jsonl() + "\n" for report in reports)


def parse_jsonl(text: str) -> List[RunReport]:
    return [RunReport.model_validate(json.loads(line)) for line in text.splitlines() if line.strip()]
