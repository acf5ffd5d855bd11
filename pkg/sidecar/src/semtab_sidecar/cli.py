"""semtab-sidecar command line."""

import click
import uvicorn

from .service import HiddenStateEmbedder, ServeConfig, create_app


@click.group()
def main():
    """Final-layer hidden-state embedding service."""


@main.command("serve")
@click.option("--model", "model_path", required=True,
              help="Hugging Face model name or local path")
@click.option("--device", default="cpu", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8099, show_default=True)
@click.option("--max-batch", type=int, default=16, show_default=True)
@click.option("--max-in-flight", type=int, default=1, show_default=True)
def serve(model_path, device, host, port, max_batch, max_in_flight):
    """Load a model and serve /embed, /health, /info."""
    cfg = ServeConfig(model_name_or_path=model_path, device=device,
                      max_batch=max_batch, max_in_flight=max_in_flight)
    embedder = HiddenStateEmbedder(cfg)
    click.echo(f"serving {embedder.model_id} (dim {embedder.dim}) "
               f"on {host}:{port}")
    uvicorn.run(create_app(embedder), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
