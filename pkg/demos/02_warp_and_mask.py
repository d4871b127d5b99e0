"""Mesh warping and validity masks.

Takes one procedural view, re-renders it from rotated poses, and saves the
warped images with their inpainting masks. Shows the identity-warp fidelity
and how the unknown region grows with the rotation angle.
"""

from pathlib import Path


from panoweave.fileio import save_mask_png, save_png
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.imageops import psnr
from panoweave.synthetic import procedural_image
from panoweave.warp import ViewRecord, build_mesh, rasterize

out = Path(__file__).parent / "output" / "02_warp_and_mask"
out.mkdir(parents=True, exist_ok=True)

K = intrinsics_from_fov(100.0, 512, 512)
view = ViewRecord(image=procedural_image(5, 512, 512), intrinsics=K, rotation=rotation_y(0.0))
mesh = build_mesh(view)
save_png(out / "source.png", view.image)

identity, mask, _ = rasterize([mesh], K, rotation_y(0.0))
print(f"identity warp PSNR: {psnr(identity, view.image):.1f} dB, unknown pixels: {int(mask.sum())}")

for yaw in [20.0, 41.0, 60.0, 90.0]:
    warped, mask, weights = rasterize([mesh], K, rotation_y(yaw))
    save_png(out / f"warp_{int(yaw):03d}.png", warped)
    save_mask_png(out / f"mask_{int(yaw):03d}.png", mask)
    print(f"yaw {yaw:5.1f} deg: unknown fraction {mask.mean():.3f}")

print(f"outputs in {out}")
