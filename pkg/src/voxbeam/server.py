"""Live frame-streaming service.

One interactive WebSocket session at a time: text control messages steer the
pipeline (applied at the next frame boundary), every rendered frame goes out
as two binary packets (L then R) followed by a stats message. Delivery is
latest-wins -- a slow consumer only ever sees the newest frame -- while the
denoiser history advances frame by frame internally.
"""

from __future__ import annotations

import asyncio
import base64
import io
import json
import logging
import os
import threading

import numpy as np
import websockets
from PIL import Image

from . import quat, wire
from .config import SessionConfig
from .envlight import CAMERA, LDR, make_map
from .paths import path_from_config
from .pipeline import ENV_PRESETS, TF_PRESETS, Pipeline, write_frame_outputs
from .render import RenderMode, Scene

log = logging.getLogger(__name__)

MAX_MESSAGE_BYTES = 32 * 1024 * 1024


class _Session:
    def __init__(self, config: SessionConfig, scene, loop):
        self.config = config
        self.pipeline = Pipeline(config, scene=scene)
        self.loop = loop
        self.mail_lock = threading.Lock()
        self.mailbox = {}
        poses = path_from_config(config.camera)
        self.pose = poses[0]
        self.stop = threading.Event()
        self.step_event = threading.Event()
        self.frame_ready = asyncio.Event()
        self.slot_lock = threading.Lock()
        self.slot = None
        self.uploads = {}
        self.thread = threading.Thread(target=self._render_loop, daemon=True)

    # -- control application (render thread, frame boundary) ---------------
    def _apply_controls(self):
        with self.mail_lock:
            pending = self.mailbox
            self.mailbox = {}
        if "pose" in pending:
            self.pose = pending["pose"]
        if "mode" in pending:
            self.pipeline.set_mode(pending["mode"])
        if "tf" in pending:
            self.pipeline.set_transfer_function(pending["tf"])
        if "env" in pending:
            name, upload_id = pending["env"]
            if upload_id is not None:
                with self.mail_lock:
                    pano = self.uploads.get(upload_id)
                if pano is None:
                    log.warning("env id %r vanished before application", upload_id)
                else:
                    self.pipeline.env_source.set_map(pano)
            else:
                self.pipeline.set_environment(name=name)
        if "params" in pending:
            self.pipeline.set_denoiser_params(pending["params"])
        if "volume_offset" in pending:
            self.pipeline.set_volume_offset(pending["volume_offset"])

    def _render_loop(self):
        outdir = self.config.output
        if outdir:
            os.makedirs(outdir, exist_ok=True)
        try:
            while not self.stop.is_set():
                if self.config.lockstep:
                    if not self.step_event.wait(timeout=0.1):
                        continue
                    self.step_event.clear()
                self._apply_controls()
                position, orientation = self.pose
                result = self.pipeline.step(position, orientation)
                t = result.frame.index
                packets = [wire.encode_frame(result.denoised[eye], t, eye,
                                             self.config.packet_encoding)
                           for eye in ("L", "R")]
                stats = json.dumps({
                    "type": "stats", "frame": t,
                    "T": result.illum_diff,
                    "render_ms": round(result.render_ms, 3),
                    "denoise_ms": round(result.denoise_ms, 3),
                    "mode": self.pipeline.mode.value,
                })
                if outdir:
                    write_frame_outputs(outdir, result, self.config.dump_aux,
                                        self.config.dump_validity)
                with self.slot_lock:
                    self.slot = (packets, stats)
                self.loop.call_soon_threadsafe(self.frame_ready.set)
        except Exception:
            log.exception("render loop failed; tearing down session")
            self.loop.call_soon_threadsafe(self.frame_ready.set)

    # -- socket side --------------------------------------------------------
    def _validate(self, msg: dict):
        kind = msg["type"]
        if kind == "pose":
            position = np.asarray(msg["position"], dtype=np.float64)
            orientation = quat.normalize(np.asarray(msg["orientation"],
                                                    dtype=np.float64))
            if position.shape != (3,):
                raise wire.WireError("pose position must be a 3-vector")
            return "pose", (position, orientation)
        if kind == "volume_offset":
            offset = np.asarray(msg["offset"], dtype=np.float64)
            if offset.shape != (3,):
                raise wire.WireError("volume_offset must be a 3-vector")
            return "volume_offset", offset
        if kind == "mode":
            try:
                RenderMode.parse(msg["mode"])
            except ValueError:
                raise wire.WireError(f"unknown render mode {msg.get('mode')!r}")
            return "mode", msg["mode"]
        if kind == "tf":
            if msg.get("name") not in TF_PRESETS:
                raise wire.WireError(f"unknown transfer function {msg.get('name')!r}")
            return "tf", msg["name"]
        if kind == "env":
            name = msg.get("name")
            upload_id = msg.get("id")
            if name is None and upload_id is None:
                raise wire.WireError("env message needs 'name' or 'id'")
            if name is not None and name not in ENV_PRESETS:
                raise wire.WireError(f"unknown environment preset {name!r}")
            if upload_id is not None:
                with self.mail_lock:
                    known = upload_id in self.uploads
                if not known:
                    raise wire.WireError(f"unknown uploaded panorama {upload_id!r}")
            return "env", (name, upload_id)
        if kind == "env_upload":
            try:
                raw = base64.b64decode(msg["png_base64"])
                with Image.open(io.BytesIO(raw)) as im:
                    arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
                pano = make_map(arr, LDR, CAMERA)
            except KeyError:
                raise wire.WireError("env_upload needs 'id' and 'png_base64'")
            except Exception as exc:
                raise wire.WireError(f"bad panorama upload: {exc}")
            with self.mail_lock:
                self.uploads[str(msg["id"])] = pano
            return None, None
        if kind == "params":
            overrides = msg.get("params")
            if not isinstance(overrides, dict):
                raise wire.WireError("params message needs a 'params' mapping")
            try:
                self.pipeline.config.denoiser.__class__(**{
                    **vars(self.pipeline.config.denoiser), **overrides})
            except (TypeError, ValueError) as exc:
                raise wire.WireError(f"bad denoiser params: {exc}")
            return "params", overrides
        raise wire.WireError(f"unknown control type {kind!r}")

    async def receive(self, ws):
        async for message in ws:
            if isinstance(message, bytes):
                await ws.send(wire.make_control(
                    "error", message="binary messages are not valid controls"))
                continue
            try:
                msg = wire.parse_control(message)
                key, value = self._validate(msg)
            except wire.WireError as exc:
                await ws.send(wire.make_control("error", message=str(exc)))
                continue
            if key is not None:
                with self.mail_lock:
                    self.mailbox[key] = value
            self.step_event.set()

    async def send_frames(self, ws):
        while True:
            await self.frame_ready.wait()
            self.frame_ready.clear()
            if self.stop.is_set():
                return
            with self.slot_lock:
                item = self.slot
                self.slot = None
            if item is None:
                if not self.thread.is_alive():
                    return
                continue
            packets, stats = item
            for p in packets:
                await ws.send(p)
            await ws.send(stats)


class FrameServer:
    def __init__(self, config: SessionConfig, scene: Scene | None = None):
        self.config = config
        self.scene = scene
        self._busy = False
        self.server = None

    async def handler(self, ws):
        if self._busy:
            await ws.send(wire.make_control(
                "error", message="another session is active"))
            await ws.close()
            return
        self._busy = True
        session = _Session(self.config, self.scene, asyncio.get_running_loop())
        session.thread.start()
        try:
            recv = asyncio.create_task(session.receive(ws))
            send = asyncio.create_task(session.send_frames(ws))
            done, pending = await asyncio.wait(
                {recv, send}, return_when=asyncio.FIRST_COMPLETED)
            for task in pending:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(
                        exc, websockets.exceptions.ConnectionClosed):
                    log.warning("session task failed: %r", exc)
        finally:
            session.stop.set()
            session.thread.join(timeout=10.0)
            self._busy = False

    async def start(self, host="127.0.0.1", port=0):
        self.server = await websockets.serve(self.handler, host, port,
                                             max_size=MAX_MESSAGE_BYTES)
        return self.server.sockets[0].getsockname()[1]

    async def close(self):
        if self.server is not None:
            self.server.close()
            await self.server.wait_closed()


def run_serve(config: SessionConfig, port: int, host="127.0.0.1",
              scene: Scene | None = None):
    """Blocking entry point: serve until interrupted."""

    async def _main():
        server = FrameServer(config, scene)
        actual = await server.start(host, port)
        log.info("serving on ws://%s:%d", host, actual)
        print(f"voxbeam serve: ws://{host}:{actual}", flush=True)
        await asyncio.Future()

    asyncio.run(_main())
