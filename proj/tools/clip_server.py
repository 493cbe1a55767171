#!/usr/bin/env python3
"""Model sidecar for the pretrained backend.

Serves a Hugging Face CLIP checkpoint over the HTTP/JSON protocol that
RemoteBackend speaks (see include/vlmaudit/remote_backend.hpp).

    python3 tools/clip_server.py --checkpoint openai/clip-vit-base-patch32 --port 8765

--tiny-random builds a small randomly initialised CLIP instead of loading
weights; useful for exercising the protocol offline.
"""

import argparse
import base64
import io
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
from PIL import Image
from transformers import CLIPConfig, CLIPImageProcessor, CLIPModel, CLIPProcessor

log = logging.getLogger("clip_server")


class LayerNotFound(ValueError):
    pass


class ClipSidecar:
    def __init__(self, model, processor, checkpoint):
        self.model = model.eval()
        self.processor = processor
        self.checkpoint = checkpoint
        self.lock = threading.Lock()
        vision = model.config.vision_config
        side = vision.image_size // vision.patch_size
        self.grid = [side, side]
        self.dim = model.config.projection_dim

    def info(self):
        return {"name": "clip", "checkpoint": self.checkpoint, "dim": self.dim, "patch_grid": self.grid}

    @torch.no_grad()
    def embed_text(self, texts):
        batch = self.processor(text=texts, return_tensors="pt", padding=True, truncation=True)
        with self.lock:
            out = self.model.get_text_features(input_ids=batch["input_ids"], attention_mask=batch["attention_mask"])
        return _features(out).tolist()

    @torch.no_grad()
    def embed_image(self, images):
        pixels = self.processor(images=[_decode(i) for i in images], return_tensors="pt")["pixel_values"]
        with self.lock:
            out = self.model.get_image_features(pixel_values=pixels)
        return _features(out).tolist()

    def _layer_module(self, layer):
        vision = self.model.vision_model
        if layer == "final":
            return vision.encoder.layers[-1]
        if layer == "patch_embed":
            return vision.embeddings
        if layer.startswith("block."):
            try:
                return vision.encoder.layers[int(layer.split(".", 1)[1])]
            except (ValueError, IndexError):
                pass
        raise LayerNotFound(f"no vision layer named {layer!r} (final, patch_embed, block.<n>)")

    def gradients(self, image, text, layer):
        module = self._layer_module(layer)
        pixels = self.processor(images=[_decode(image)], return_tensors="pt")["pixel_values"]
        tokens = self.processor(text=[text], return_tensors="pt", padding=True, truncation=True)
        captured = {}

        def hook(_module, _inputs, output):
            hidden = output[0] if isinstance(output, tuple) else output
            hidden.retain_grad()
            captured["hidden"] = hidden

        with self.lock:
            handle = module.register_forward_hook(hook)
            try:
                self.model.zero_grad(set_to_none=True)
                img = _features(self.model.get_image_features(pixel_values=pixels))
                with torch.no_grad():
                    txt = _features(
                        self.model.get_text_features(
                            input_ids=tokens["input_ids"], attention_mask=tokens["attention_mask"]
                        )
                    )
                similarity = torch.nn.functional.cosine_similarity(img, txt).sum()
                similarity.backward()
            finally:
                handle.remove()

        hidden = captured["hidden"]
        return {
            "grid": self.grid,
            "channels": hidden.shape[-1],
            "has_summary_token": True,
            "activations": hidden[0].detach().tolist(),
            "gradients": hidden.grad[0].tolist(),
            "similarity": float(similarity.item()),
        }


def _features(out):
    # get_*_features returns a tensor in older releases and a model output in newer ones.
    if isinstance(out, torch.Tensor):
        return out
    return out.pooler_output


def _decode(data):
    return Image.open(io.BytesIO(base64.b64decode(data))).convert("RGB")


def tiny_random_model(seed):
    torch.manual_seed(seed)
    config = CLIPConfig(
        text_config={"hidden_size": 32, "intermediate_size": 64, "num_hidden_layers": 2, "num_attention_heads": 2},
        vision_config={
            "hidden_size": 32,
            "intermediate_size": 64,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "image_size": 224,
            "patch_size": 32,
        },
        projection_dim=16,
    )
    return CLIPModel(config)


class TinyProcessor:
    """Offline stand-in for CLIPProcessor: hashed word ids, stock image preprocessing."""

    def __init__(self, vocab_size):
        self.vocab_size = vocab_size
        self.images = CLIPImageProcessor()

    def _ids(self, text):
        words = text.lower().split()[:30]
        body = [2 + sum(w.encode()) * 31 % (self.vocab_size - 3) for w in words]
        return [0] + body + [self.vocab_size - 1]

    def __call__(self, text=None, images=None, return_tensors="pt", **_):
        if images is not None:
            return self.images(images=images, return_tensors=return_tensors)
        ids = [self._ids(t) for t in text]
        width = max(len(i) for i in ids)
        input_ids = torch.tensor([i + [1] * (width - len(i)) for i in ids])
        mask = torch.tensor([[1] * len(i) + [0] * (width - len(i)) for i in ids])
        return {"input_ids": input_ids, "attention_mask": mask}


def make_handler(sidecar):
    class Handler(BaseHTTPRequestHandler):
        def _send(self, status, payload):
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/info":
                self._send(200, sidecar.info())
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                req = json.loads(self.rfile.read(length))
                if self.path == "/embed/text":
                    self._send(200, {"embeddings": sidecar.embed_text(req["texts"])})
                elif self.path == "/embed/image":
                    self._send(200, {"embeddings": sidecar.embed_image(req["images"])})
                elif self.path == "/gradients":
                    self._send(200, sidecar.gradients(req["image"], req["text"], req.get("layer", "final")))
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})
            except LayerNotFound as e:
                self._send(422, {"error": str(e)})
            except (KeyError, ValueError, json.JSONDecodeError) as e:
                self._send(400, {"error": f"bad request: {e}"})
            except Exception as e:  # surfaced to the client as a backend error
                log.exception("request failed")
                self._send(500, {"error": str(e)})

        def log_message(self, fmt, *args):
            log.debug(fmt, *args)

    return Handler


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--checkpoint", default="openai/clip-vit-base-patch32")
    parser.add_argument("--tiny-random", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--port-file", help="write the bound port here once listening")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)

    if args.tiny_random:
        model = tiny_random_model(args.seed)
        processor = TinyProcessor(model.config.text_config.vocab_size)
        name = f"tiny-random-{args.seed}"
    else:
        model = CLIPModel.from_pretrained(args.checkpoint)
        processor = CLIPProcessor.from_pretrained(args.checkpoint)
        name = args.checkpoint

    server = ThreadingHTTPServer((args.host, args.port), make_handler(ClipSidecar(model, processor, name)))
    port = server.server_address[1]
    if args.port_file:
        with open(args.port_file, "w") as f:
            f.write(str(port))
    log.info("serving %s on %s:%d", name, args.host, port)
    server.serve_forever()


if __name__ == "__main__":
    main()
