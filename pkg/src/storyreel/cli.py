"""Operator CLI: one subcommand per pipeline stage, `auto` for the whole
flow, `serve` for the curation API.

Exit codes: 0 success, 2 usage, 3 backend failure, 4 contract violation,
5 render-tool failure.
"""

import dataclasses
import logging
import os
import sys

import click

from . import api
from .config import PipelineConfig, resolve_config
from .errors import EXIT_USAGE, InvalidRequestError, StoryReelError
from .pipeline import Pipeline
from .store import ProjectStore
from .story import StoryRequest

DEFAULT_PROJECT = "storyreel-project"

logging.basicConfig(level=os.environ.get("STORYREEL_LOG", "WARNING"),
                    format="%(levelname)s %(name)s: %(message)s")


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file; flags override it.")
@click.option("--project", "project_dir", type=click.Path(), default=DEFAULT_PROJECT,
              show_default=True, help="Project directory.")
@click.option("--backends", type=click.Choice(["mock", "live"]), default=None,
              help="Backend selection (default mock).")
@click.option("--seed", type=int, default=None, help="Generation seed (default 0).")
@click.option("--parallelism", type=int, default=None, help="Bounded worker count.")
@click.option("--fps", type=int, default=None, help="Output frame rate.")
@click.option("--candidates", "candidates_n", type=int, default=None,
              help="Candidate images per scene.")
@click.pass_context
def main(ctx, config_path, project_dir, backends, seed, parallelism, fps, candidates_n):
    """Turn two nouns into a narrated, illustrated, music-backed story video."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, project_dir=project_dir,
                   backends=backends, seed=seed, parallelism=parallelism,
                   fps=fps, candidates_n=candidates_n)


def _config(obj) -> PipelineConfig:
    return resolve_config(obj["config_path"], backends=obj["backends"],
                          seed=obj["seed"], parallelism=obj["parallelism"],
                          fps=obj["fps"], candidates=obj["candidates_n"])


def _request(config: PipelineConfig, x: str, y: str, genre: str | None) -> StoryRequest:
    if genre:
        return StoryRequest(x, y, config.seed, genre_preset="custom",
                            custom_prefix=genre)
    return StoryRequest(x, y, config.seed)


def _fingerprints(config: PipelineConfig) -> dict:
    return {kind: ep.fingerprint for kind, ep in sorted(config.endpoints.items())}


def _open_project(obj) -> tuple[ProjectStore, PipelineConfig]:
    config = _config(obj)
    store = ProjectStore.load(obj["project_dir"])
    store.manifest["config"] = config.to_dict()
    return store, config


def _fail(exc: StoryReelError):
    click.echo(f"error: {exc}", err=True)
    sys.exit(exc.exit_code)


def _run_stage_command(obj, stage: str, config_tweak=None):
    try:
        store, config = _open_project(obj)
        if config_tweak:
            config = config_tweak(config)
        with store:
            Pipeline(store, config).run_stage(stage, command=stage)
        click.echo(f"stage {stage}: done")
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.option("--x", "x", required=True, help="First protagonist noun.")
@click.option("--y", "y", required=True, help="Second protagonist noun.")
@click.option("--genre", default=None, help="Custom genre text (default: children's story).")
@click.option("--force", is_flag=True, help="Reinitialize an existing project.")
@click.pass_obj
def new(obj, x, y, genre, force):
    """Initialize a project directory."""
    try:
        config = _config(obj)
        request = _request(config, x, y, genre)
        ProjectStore.init_project(obj["project_dir"], request.to_dict(),
                                  config.to_dict(), _fingerprints(config), force=force)
        click.echo(f"initialized project at {os.path.abspath(obj['project_dir'])}")
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.option("--x", "x", required=True)
@click.option("--y", "y", required=True)
@click.option("--genre", default=None, help="Custom genre text.")
@click.pass_obj
def auto(obj, x, y, genre):
    """Run the whole pipeline with automated first-candidate selection."""
    try:
        config = _config(obj)
        request = _request(config, x, y, genre)
        project_dir = obj["project_dir"]
        if os.path.exists(os.path.join(project_dir, "manifest.json")):
            store = ProjectStore.load(project_dir)
            if store.manifest["request"] != request.to_dict():
                raise InvalidRequestError(
                    f"project at {project_dir} was created for a different request; "
                    f"pick another --project directory")
            store.manifest["config"] = config.to_dict()
        else:
            store = ProjectStore.init_project(project_dir, request.to_dict(),
                                              config.to_dict(), _fingerprints(config))
        with store:
            pipe = Pipeline(store, config, selection_policy="first")
            # Canonical command string: no paths, so two identical runs in
            # different directories produce identical manifests.
            command = (f"auto --x {x} --y {y} --seed {request.seed} "
                       f"--backends {config.backends}")
            final_path = pipe.run_pending(command=command)
        if final_path:
            click.echo(os.path.abspath(store.abspath(final_path)))
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.pass_obj
def story(obj):
    """Generate the story text."""
    _run_stage_command(obj, "story")


@main.command()
@click.pass_obj
def describe(obj):
    """Generate one picture description per sentence."""
    _run_stage_command(obj, "descriptions")


@main.command()
@click.pass_obj
def candidates(obj):
    """Generate candidate images for every scene."""
    try:
        store, config = _open_project(obj)
        n = obj["candidates_n"] or config.curated_candidates
        with store:
            Pipeline(store, config, candidates_per_scene=n).run_stage(
                "candidates", command="candidates")
        click.echo(f"stage candidates: done ({n} per scene)")
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.option("--policy", type=click.Choice(["first", "none"]), default="first",
              show_default=True)
@click.pass_obj
def select(obj, policy):
    """Apply a selection policy (the selection stage)."""
    try:
        store, config = _open_project(obj)
        with store:
            Pipeline(store, config, selection_policy=policy).run_stage(
                "selection", command="select")
        click.echo("stage selection: done")
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.pass_obj
def speech(obj):
    """Synthesize narration."""
    _run_stage_command(obj, "speech")


@main.command()
@click.option("--preset", default=None, help="Music artist preset.")
@click.pass_obj
def music(obj, preset):
    """Generate the music bed (and separate vocals)."""
    def tweak(config: PipelineConfig) -> PipelineConfig:
        if preset is None:
            return config
        return dataclasses.replace(
            config, music=dataclasses.replace(config.music, preset=preset))
    _run_stage_command(obj, "music", config_tweak=tweak)


@main.command()
@click.pass_obj
def scenes(obj):
    """Render each scene's camera move into a clip."""
    _run_stage_command(obj, "scenes")


@main.command()
@click.option("--dump-envelope", is_flag=True,
              help="Write the duck envelope to logs/envelope.csv.")
@click.pass_obj
def mix(obj, dump_envelope):
    """Mix narration over ducked music."""
    def tweak(config: PipelineConfig) -> PipelineConfig:
        if not dump_envelope:
            return config
        return dataclasses.replace(
            config, mix=dataclasses.replace(config.mix, dump_envelope=True))
    _run_stage_command(obj, "mix", config_tweak=tweak)


@main.command()
@click.pass_obj
def render(obj):
    """Assemble the final video and subtitles."""
    try:
        store, config = _open_project(obj)
        with store:
            Pipeline(store, config).run_stage("render", command="render")
        final = store.manifest["final"]
        click.echo(os.path.abspath(store.abspath(final["video"]["path"])))
    except StoryReelError as exc:
        _fail(exc)


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(obj, port, host):
    """Serve the curation API (and UI, if built) until interrupted."""
    try:
        store, config = _open_project(obj)
        if _port_busy(host, port):
            raise InvalidRequestError(f"port {port} is already in use")
        ui_dir = _ui_dist_dir()
        store.acquire_lock()
        try:
            app = api.create_app(store, config, ui_dir=ui_dir)
            import uvicorn
            click.echo(f"curation API on http://{host}:{port}  (ctrl-c to stop)")
            uvicorn.run(app, host=host, port=port, log_level="warning")
        finally:
            store.release_lock()
    except StoryReelError as exc:
        _fail(exc)


def _port_busy(host: str, port: int) -> bool:
    import socket
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        try:
            s.bind((host, port))
        except OSError:
            return True
    return False


def _ui_dist_dir() -> str | None:
    here = os.path.dirname(__file__)
    candidates = [
        os.environ.get("STORYREEL_UI_DIR", ""),
        os.path.join(here, "ui"),  # packaged build, if bundled
        os.path.join(here, "..", "..", "frontend", "dist"),  # editable checkout
        os.path.join(os.getcwd(), "frontend", "dist"),
    ]
    for c in candidates:
        if c and os.path.isdir(c):
            return os.path.abspath(c)
    return None


if __name__ == "__main__":
    main()
