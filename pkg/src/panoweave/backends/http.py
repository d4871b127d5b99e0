"""HTTP adapters for hosted model services.

JSON over POST, images as base64 lossless PNG, depth as base64 PFM. Routes
are fixed per kind under the configured base URL:

    /v1/inpaint    {image, mask, prompt, negative_prompt, seed} -> {image}
    /v1/chat       {prompt} -> {text}                 (style="simple")
                   {messages: [{role, content}]} -> {choices: [{message: {content}}]}
                                                     (style="chat_completions")
    /v1/vqa        {image, question} -> {answer}
    /v1/superres   {image, factor} -> {image}
    /v1/depth      {image} -> {depth}
    /v1/text2image {prompt, seed} -> {image}

Adapters never retry silently; failures surface as BackendError with a
retriable flag (transport/5xx yes, protocol/4xx no).
"""

from __future__ import annotations

import logging

import numpy as np
import requests

from panoweave.backends import BackendError
from panoweave.fileio import (
    b64_of,
    bytes_of_b64,
    decode_pfm_bytes,
    decode_png_bytes,
    encode_mask_png_bytes,
    encode_png_bytes,
)

logger = logging.getLogger(__name__)

DEPTH_EPS = 1e-4


class _HttpBackend:
    path = ""

    def __init__(self, endpoint: str, timeout: float = 120.0):
        if not endpoint:
            raise ValueError("http backend requires an endpoint URL")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = float(timeout)
        self._session = requests.Session()

    def _post(self, payload: dict, path: str | None = None) -> dict:
        url = self.endpoint + (path or self.path)
        try:
            resp = self._session.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"transport failure POST {url}: {exc}", retriable=True) from exc
        if resp.status_code >= 500:
            raise BackendError(f"server error {resp.status_code} from {url}", retriable=True)
        if resp.status_code >= 400:
            raise BackendError(f"request rejected ({resp.status_code}) by {url}", retriable=False)
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendError(f"non-JSON response from {url}", retriable=False) from exc

    def _field(self, data: dict, key: str):
        if key not in data:
            raise BackendError(f"response from {self.endpoint}{self.path} lacks {key!r}", retriable=False)
        return data[key]


class HttpInpaintBackend(_HttpBackend):
    path = "/v1/inpaint"

    def inpaint(self, image, mask, prompt: str, negative_prompt: str, seed: int):
        image = np.asarray(image, dtype=np.float32)
        mask = np.asarray(mask, dtype=bool)
        if image.shape[:2] != mask.shape:
            raise ValueError(f"image {image.shape[:2]} and mask {mask.shape} differ")
        data = self._post(
            {
                "image": b64_of(encode_png_bytes(image)),
                "mask": b64_of(encode_mask_png_bytes(mask)),
                "prompt": prompt,
                "negative_prompt": negative_prompt,
                "seed": int(seed),
            }
        )
        out = decode_png_bytes(bytes_of_b64(self._field(data, "image")))
        if out.shape != image.shape:
            raise BackendError(
                f"inpaint returned shape {out.shape}, expected {image.shape}", retriable=False
            )
        # real inpainting services re-encode the whole frame; the pipeline
        # depends on unmasked pixels surviving bit-exactly
        keep = ~mask
        if not np.array_equal(out[keep], image[keep]):
            logger.warning("inpaint response altered unmasked pixels; restoring them from the input")
            out = np.where(mask[..., None], out, image)
        return out.astype(np.float32)


class HttpChatBackend(_HttpBackend):
    path = "/v1/chat"

    def __init__(self, endpoint: str, timeout: float = 120.0, style: str = "simple"):
        super().__init__(endpoint, timeout)
        if style not in ("simple", "chat_completions"):
            raise ValueError(f"unknown chat style {style!r}")
        self.style = style

    def chat(self, prompt: str) -> str:
        if self.style == "simple":
            return str(self._field(self._post({"prompt": prompt}), "text"))
        data = self._post({"messages": [{"role": "user", "content": prompt}]})
        try:
            return str(data["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed chat-completions response", retriable=False) from exc


class HttpVqaBackend(_HttpBackend):
    path = "/v1/vqa"

    def vqa(self, image, question: str) -> str:
        data = self._post(
            {"image": b64_of(encode_png_bytes(np.asarray(image, np.float32))), "question": question}
        )
        return str(self._field(data, "answer"))


class HttpSuperresBackend(_HttpBackend):
    path = "/v1/superres"

    def superresolve(self, image, factor: int = 4):
        if factor != 4:
            raise ValueError(f"superresolve supports factor 4 only, got {factor}")
        image = np.asarray(image, dtype=np.float32)
        data = self._post({"image": b64_of(encode_png_bytes(image)), "factor": factor})
        out = decode_png_bytes(bytes_of_b64(self._field(data, "image")))
        h, w = image.shape[:2]
        if out.shape[:2] != (4 * h, 4 * w):
            raise BackendError(
                f"superres returned {out.shape[1]}x{out.shape[0]}, expected {4 * w}x{4 * h}",
                retriable=False,
            )
        return out


class HttpDepthBackend(_HttpBackend):
    path = "/v1/depth"

    def estimate_depth(self, image):
        image = np.asarray(image, dtype=np.float32)
        data = self._post({"image": b64_of(encode_png_bytes(image))})
        depth = decode_pfm_bytes(bytes_of_b64(self._field(data, "depth")))
        bad = ~(depth > 0) | ~np.isfinite(depth)
        if bad.any():
            logger.warning("depth response had %d nonpositive/nonfinite pixels; clamping", int(bad.sum()))
            depth = np.where(bad, DEPTH_EPS, depth).astype(np.float32)
        return depth


class HttpTextToImageBackend(_HttpBackend):
    path = "/v1/text2image"

    def text_to_image(self, prompt: str, seed: int):
        data = self._post({"prompt": prompt, "seed": int(seed)})
        return decode_png_bytes(bytes_of_b64(self._field(data, "image")))
