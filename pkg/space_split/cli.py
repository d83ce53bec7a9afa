#!/usr/bin/env python3
"""
Command shell for space-split sensitivity experiments.

One-shot:    s3 sweep --config configs/sweep_baker.ini --out sweep_baker.csv
Interactive: s3
"""

import cmd
import json
import shlex
import sys
from typing import Dict, Optional

from space_split.src.config import MODES, parse_config
from space_split.src.errors import ConfigError, S3Error
from space_split.src.experiments import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, run_experiment
from space_split.src.registry import available_maps, available_observables
from space_split.src.terminal import ColorPrinter

# Flag -> (config key, takes a value)
FLAGS = {
    "--config": ("config", True),
    "--seed": ("seed", True),
    "--out": ("output", True),
    "--format": ("format", True),
    "--workers": ("workers", True),
    "--no-timestamp": ("timestamp", False),
}

MODE_USAGE = [
    "{mode} [--config FILE] [--seed S] [--out PATH] [--format csv|json] [--no-timestamp] [--workers N] [key=value ...]",
    "  - key=value overrides any config entry, e.g. n_steps=1e5 seeds=0,1,2",
    "  - example: {mode} --config configs/sweep_baker.ini --out {mode}.csv",
]


class S3Shell(cmd.Cmd):
    intro = "Space-split sensitivity shell. Type 'help' for commands."
    prompt = "s3> "

    def __init__(self):
        super().__init__()
        self.last_exit = EXIT_OK

    def _parse_args(self, arg):
        try:
            return shlex.split(arg)
        except ValueError as exc:
            ColorPrinter.error(f"Parse error: {exc}")
            return None

    def _is_help(self, args):
        if not args:
            return False
        return args[-1].lower() in ("help", "-h", "--help")

    def _strip_help(self, args):
        if self._is_help(args):
            return args[:-1], True
        return args, False

    def _print_usage(self, lines):
        for line in lines:
            if line.strip().startswith("-"):
                print(ColorPrinter._paint(ColorPrinter.YELLOW, line))
            else:
                print(ColorPrinter._paint(ColorPrinter.CYAN, line))

    def _parse_flags(self, args) -> Optional[Dict[str, object]]:
        """Turn command arguments into (config path, overrides); None on a bad flag."""
        overrides: Dict[str, object] = {}
        i = 0
        while i < len(args):
            token = args[i]
            if token in FLAGS:
                key, takes_value = FLAGS[token]
                if not takes_value:
                    overrides[key] = False
                    i += 1
                    continue
                if i + 1 >= len(args):
                    ColorPrinter.error(f"{token} needs a value")
                    return None
                overrides[key] = args[i + 1]
                i += 2
            elif "=" in token and not token.startswith("-"):
                key, value = token.split("=", 1)
                overrides[key.strip()] = value.strip()
                i += 1
            else:
                ColorPrinter.error(f"Unknown argument '{token}'. Flags: {sorted(FLAGS)}")
                return None
        return overrides

    def _load(self, mode, args):
        """Resolve a config for ``mode`` from command arguments; sets last_exit on failure."""
        overrides = self._parse_flags(args)
        if overrides is None:
            self.last_exit = EXIT_CONFIG
            return None
        path = overrides.pop("config", None)
        seed = overrides.pop("seed", None)
        if seed is not None:
            try:
                seed = int(seed)
            except ValueError:
                ColorPrinter.error(f"--seed expects an integer, got '{seed}'")
                self.last_exit = EXIT_CONFIG
                return None
            # Converge mode compares two initializations
            overrides["seeds"] = [seed, seed + 1] if mode == "converge" else [seed]
        if mode is not None:
            overrides["mode"] = mode
        try:
            return parse_config(path=path, text="" if path is None else None, overrides=overrides)
        except ConfigError as exc:
            ColorPrinter.error(f"Config error: {exc}")
            self.last_exit = EXIT_CONFIG
        except OSError as exc:
            ColorPrinter.error(str(exc))
            self.last_exit = EXIT_IO
        return None

    def _run_mode(self, mode, arg):
        args = self._parse_args(arg)
        if args is None:
            self.last_exit = EXIT_CONFIG
            return
        args, help_flag = self._strip_help(args)
        if help_flag:
            self._print_usage([line.format(mode=mode) for line in MODE_USAGE])
            return
        cfg = self._load(mode, args)
        if cfg is None:
            return
        try:
            outcome = run_experiment(cfg, verbose=True)
        except OSError as exc:
            ColorPrinter.error(str(exc))
            self.last_exit = EXIT_IO
            return
        except S3Error as exc:
            ColorPrinter.error(str(exc))
            self.last_exit = EXIT_NUMERICAL
            return
        self.last_exit = outcome.exit_code

    # --------------------------
    # Experiment commands
    # --------------------------
    def do_run(self, arg):
        "run [flags]: S3 sensitivity for every seed, all K of the grid"
        self._run_mode("run", arg)

    def do_sweep(self, arg):
        "sweep [flags]: S3 and finite differences over the s grid"
        self._run_mode("sweep", arg)

    def do_converge(self, arg):
        "converge [flags]: difference norms of two initializations on one trajectory"
        self._run_mode("converge", arg)

    def do_scaling(self, arg):
        "scaling [flags]: relative error against the reference over N or K"
        self._run_mode("scaling", arg)

    def do_lyapunov(self, arg):
        "lyapunov [flags]: leading Lyapunov exponents from the frame recursion"
        self._run_mode("lyapunov", arg)

    def do_fd(self, arg):
        "fd [flags]: central finite-difference sensitivity"
        self._run_mode("fd", arg)

    def do_show(self, arg):
        "show [flags]: print the resolved config without running it"
        args = self._parse_args(arg)
        if args is None:
            return
        args, help_flag = self._strip_help(args)
        if help_flag:
            self._print_usage(["show [--config FILE] [key=value ...]", "  - example: show --config configs/sweep_solenoid.ini"])
            return
        cfg = self._load(None, args)
        if cfg is None:
            return
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        self.last_exit = EXIT_OK

    def do_list(self, arg):
        "list: show the registered maps and observables"
        ColorPrinter.cyan(f"maps:        {', '.join(available_maps())}")
        ColorPrinter.cyan(f"observables: {', '.join(available_observables())}")
        ColorPrinter.cyan(f"modes:       {', '.join(MODES)}")

    def emptyline(self):
        pass

    def default(self, line):
        ColorPrinter.error(f"Unknown syntax: {line}")
        self.last_exit = EXIT_CONFIG

    def do_exit(self, arg):
        "exit: quit the shell"
        return True

    def do_quit(self, arg):
        "quit: quit the shell"
        return True

    def do_EOF(self, arg):
        print()
        return True

    def do_help(self, arg):
        "help [command]: show help for a command, or list all commands"
        if arg:
            doc = getattr(getattr(self, f"do_{arg}", None), "__doc__", None)
            if not doc:
                ColorPrinter.warning(f"No help for '{arg}'.")
                return
            lines = doc.strip().splitlines()
            print(ColorPrinter._paint(ColorPrinter.CYAN, lines[0]))
            for line in lines[1:]:
                print(line)
            if arg in MODES:
                self._print_usage([line.format(mode=arg) for line in MODE_USAGE])
            return

        def section(title):
            print(ColorPrinter._paint(ColorPrinter.YELLOW + ColorPrinter.BOLD, f"\n{title}"))

        def cmd_line(name, desc):
            print(f"  {ColorPrinter._paint(ColorPrinter.CYAN, f'{name:<10}')} {desc}")

        print(f"Space-split sensitivity shell  -  type {ColorPrinter._paint(ColorPrinter.CYAN, 'help <command>')} for details")

        section("EXPERIMENTS")
        cmd_line("run", "S3 sensitivity per seed")
        cmd_line("sweep", "S3 and FD over the s grid")
        cmd_line("converge", "initialization-difference norms per step")
        cmd_line("scaling", "error against the reference over N or K")
        cmd_line("lyapunov", "leading Lyapunov exponents")
        cmd_line("fd", "finite-difference sensitivity")

        section("GENERAL")
        cmd_line("show", "print the resolved config")
        cmd_line("list", "registered maps, observables and modes")
        cmd_line("exit", "quit the shell")
        print()


def main(argv=None):
    """Run one command from ``argv`` and return its exit code, or start the shell."""
    args = sys.argv[1:] if argv is None else list(argv)
    shell = S3Shell()
    if args:
        if args[0] not in MODES and args[0] not in ("show", "list", "help"):
            ColorPrinter.error(f"Unknown command '{args[0]}'. Available: {list(MODES) + ['show', 'list', 'help']}")
            return EXIT_CONFIG
        shell.onecmd(" ".join(shlex.quote(a) for a in args))
        return shell.last_exit
    shell.cmdloop()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
