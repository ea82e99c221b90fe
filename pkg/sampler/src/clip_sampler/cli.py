"""Command line: score image-caption pairs into the JSON Lines schema.

Captions come from a TSV with three columns: instance id, image file, and
caption text.  Image paths are resolved against --images when relative.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import SamplerConfig
from .encoders import load_encoder
from .errors import SamplerError
from .sampling import Pair, score_pairs
from .writer import write_records


def read_pairs(captions_path: Path, images_root: Path | None) -> list[Pair]:
    pairs = []
    with captions_path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise SamplerError(
                    f"{captions_path}:{lineno}: expected 'id<TAB>image<TAB>caption'"
                )
            instance_id, image, caption = fields
            if images_root is not None and not Path(image).is_absolute():
                image = str(images_root / image)
            pairs.append(Pair(id=instance_id, image=image, caption=caption))
    if not pairs:
        raise SamplerError(f"{captions_path}: no pairs found")
    ids = [p.id for p in pairs]
    if len(set(ids)) != len(ids):
        raise SamplerError(f"{captions_path}: duplicate instance ids")
    return pairs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-sampler",
        description="Score image-caption pairs with attention-mask sampling",
    )
    parser.add_argument("--model", default="stub",
                        help="'stub' or a Hugging Face CLIP checkpoint id")
    parser.add_argument("--images", default=None,
                        help="directory for relative image paths in the TSV")
    parser.add_argument("--captions", required=True,
                        help="TSV file: id<TAB>image<TAB>caption")
    parser.add_argument("--I", dest="num_image_samples", type=int, default=20,
                        help="patch-masked image samples per pair")
    parser.add_argument("--T", dest="num_text_samples", type=int, default=20,
                        help="word-masked caption samples per pair")
    parser.add_argument("--xi-image", type=float, default=25.0,
                        help="percent of image patches masked per sample")
    parser.add_argument("--xi-text", type=float, default=25.0,
                        help="percent of maskable words masked per sample")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = SamplerConfig(
        model=args.model,
        num_image_samples=args.num_image_samples,
        num_text_samples=args.num_text_samples,
        xi_image=args.xi_image,
        xi_text=args.xi_text,
        seed=args.seed,
    )
    try:
        encoder = load_encoder(config.model)
        pairs = read_pairs(
            Path(args.captions), Path(args.images) if args.images else None
        )
        records = score_pairs(pairs, config, encoder)
        write_records(records, Path(args.out))
    except (SamplerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(records)} instances to {args.out}")
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
