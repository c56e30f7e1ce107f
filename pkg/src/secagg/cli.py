"""Command-line client for the aggregation experiment service.

Commands run against the in-process service by default, so no server needs
to be up; --server points them at a remote instance instead. Exit codes:
0 success, 2 usage or domain error, 3 verification failure.
"""

from __future__ import annotations

import asyncio
import sys

import click
import httpx


class ServiceClient:
    """HTTP client bound either to a remote server or the in-process app."""

    def __init__(self, server: str | None = None):
        self._server = server

    def post(self, path: str, payload: dict) -> httpx.Response:
        if self._server:
            with httpx.Client(base_url=self._server, timeout=600.0) as client:
                return client.post(path, json=payload)

        from .service import app

        async def _call() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://secagg.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(_call())


def _check_response(resp: httpx.Response) -> dict:
    """Domain/validation rejections exit 2; other failures bubble up."""
    if resp.status_code in (400, 422):
        body = resp.json()
        detail = body.get("detail", body)
        if isinstance(detail, list):  # pydantic validation errors
            detail = "; ".join(
                f"{'.'.join(str(x) for x in err.get('loc', []))}: {err.get('msg')}"
                for err in detail
            )
        click.echo(f"error: {detail}", err=True)
        sys.exit(2)
    resp.raise_for_status()
    return resp.json()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run in-process).")
@click.pass_context
def main(ctx, server):
    """Secure gradient aggregation experiments."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--M", "m", type=int, required=True, help="Number of users (>= 3).")
@click.option("--K", "k", type=int, required=True, help="Number of servers.")
@click.option("--r", type=int, required=True, help="Gradient partition count (<= K-1).")
@click.option("--p", type=int, default=300, show_default=True, help="Gradient length.")
@click.option("--q", type=int, default=None, help="Prime modulus (default 2^31-1).")
@click.option("--seed", type=int, default=0, envvar="SECAGG_SEED", show_default=True)
@click.option("--stragglers", type=int, default=0, show_default=True,
              help="Servers sitting out the downlink.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the run report JSON here instead of stdout.")
@click.pass_obj
def e2e(client: ServiceClient, m, k, r, p, q, seed, stragglers, out):
    """Run one full aggregation round and verify exact recovery."""
    payload = {"M": m, "K": k, "r": r, "p": p, "seed": seed, "stragglers": stragglers}
    if q is not None:
        payload["q"] = q
    body = _check_response(client.post("/e2e", payload))
    _emit(body["report_json"] + "\n", out)
    if not body["ok"]:
        click.echo("error: reconstructed aggregate does not match the direct sum", err=True)
        sys.exit(3)


@main.command()
@click.option("--M", "m", type=int, default=3, show_default=True)
@click.option("--K", "k", type=int, default=3, show_default=True)
@click.option("--n", type=int, default=1, show_default=True, help="Alignment order.")
@click.option("--seed", type=int, default=0, envvar="SECAGG_SEED", show_default=True)
@click.option("--seeds", type=int, default=20, show_default=True,
              help="Number of channel realizations to verify.")
@click.option("--P", "powers", type=float, multiple=True,
              help="Transmit powers for the leakage sweep (repeatable).")
@click.option("--duplex", type=click.Choice(["both", "full", "half"]), default="both",
              show_default=True, help="Downlink server duplex variants to check.")
@click.option("--no-noise", is_flag=True,
              help="Negative control: drop the artificial noise directions.")
@click.option("--tprime-cap", type=int, default=4096, show_default=True,
              help="Refuse runs whose block length exceeds this.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the verification CSV here instead of stdout.")
@click.pass_obj
def align(client: ServiceClient, m, k, n, seed, seeds, powers, duplex, no_noise,
          tprime_cap, out):
    """Verify alignment containment, receiver rank, and leakage slopes."""
    payload = {
        "M": m, "K": k, "n": n, "seed": seed, "seeds": seeds,
        "duplex": duplex, "no_noise": no_noise, "tprime_cap": tprime_cap,
    }
    if powers:
        payload["powers"] = sorted(powers)
    body = _check_response(client.post("/align", payload))
    _emit(body["csv"], out)
    if not body["ok"]:
        bad = [row for row in body["rows"] if not row["ok"]]
        for row in bad[:5]:
            click.echo(
                f"error: {row['direction']} seed {row['seed']}: residual="
                f"{row['max_containment_residual']:.3g} sv_ratio={row['min_sv_ratio']:.3g}"
                f" slope={row['leakage_slope']}", err=True,
            )
        sys.exit(3)


@main.command()
@click.option("--M", "ms", type=int, multiple=True, help="User counts (repeatable).")
@click.option("--K", "ks", type=int, multiple=True, help="Server counts (repeatable).")
@click.option("--r", type=int, default=None, help="Fixed r (default rule: r = K-1).")
@click.option("--single-server/--no-single-server", default=True, show_default=True,
              help="Include the single-server baseline columns.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the sweep CSV here instead of stdout.")
@click.pass_obj
def sweep(client: ServiceClient, ms, ks, r, single_server, out):
    """Emit the closed-form NDT/DoF/gap table as CSV."""
    payload: dict = {"single_server": single_server}
    if ms:
        payload["M"] = sorted(ms)
    if ks:
        payload["K"] = sorted(ks)
    if r is not None:
        payload["r"] = r
    body = _check_response(client.post("/sweep", payload))
    _emit(body["csv"], out)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the experiment service over HTTP."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
