"""Command-line entry points: extract features from a video, validate a
feature file."""

from __future__ import annotations

import argparse
import os
import sys

from . import frames, sampling, tsff, vgg


def _extract(args: argparse.Namespace) -> int:
    n = frames.count_frames(args.input)
    indices = sampling.select_frame_indices(n, args.frames)
    imgs = frames.read_frames(args.input, indices)

    net = vgg.build_network(args.weights)
    conv_seq, fc_seq = [], []
    for img in imgs:
        conv, fc = vgg.frame_activations(net, img)
        conv_seq.append(conv)
        fc_seq.append(fc)

    video_id = args.video_id or os.path.splitext(os.path.basename(args.input))[0]
    tsff.write(args.out, video_id, args.label, conv_seq, fc_seq,
               conv_shape=vgg.CONV_SHAPE)
    print(f"wrote {args.out}: id={video_id} label={args.label} "
          f"T={args.frames} (from {n} source frames) "
          f"conv={'x'.join(map(str, vgg.CONV_SHAPE))} fc={vgg.FC_DIM}")
    return 0


def _validate(args: argparse.Namespace) -> int:
    rep = tsff.validate(args.file)
    print(f"{args.file}: ok id={rep.video_id} label={rep.label} T={rep.T} "
          f"conv={'x'.join(map(str, rep.conv_shape))} fc={rep.fc_dim} "
          f"payload={rep.payload_bytes}B")
    return 0


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(
        prog="tsff-extract",
        description="Export dual-layer VGG-16 activations to .tsff files")
    sub = p.add_subparsers(dest="cmd", required=True)

    e = sub.add_parser("extract", help="extract features from one video")
    e.add_argument("input", help="video file or directory of frame images")
    e.add_argument("--frames", type=int, required=True,
                   help="number of frames to sample")
    e.add_argument("--label", type=int, required=True, help="class index")
    e.add_argument("--out", required=True, help="output .tsff path")
    e.add_argument("--video-id", default=None,
                   help="id recorded in the file (default: input basename)")
    e.add_argument("--weights", default="pretrained",
                   help="'pretrained', 'random' (testing only), or a path to "
                        "a saved state dict")
    e.set_defaults(fn=_extract)

    v = sub.add_parser("validate", help="check a .tsff file's structure")
    v.add_argument("file")
    v.set_defaults(fn=_validate)

    args = p.parse_args(argv)
    try:
        return args.fn(args)
    except (tsff.ValidationError, frames.DecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
