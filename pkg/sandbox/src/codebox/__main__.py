import argparse

from .server import serve


def main() -> None:
    parser = argparse.ArgumentParser(prog="codebox")
    parser.add_argument("workdir", nargs="?", default=".")
    parser.add_argument("--mem-mb", type=int, default=None,
                        help="address-space limit per worker, in MiB")
    args = parser.parse_args()
    serve(args.workdir, memory_limit_mb=args.mem_mb)


if __name__ == "__main__":
    main()
