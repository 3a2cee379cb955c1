# Label-aware training augmentations on synthetic patches.
#
# Pixel ops (HSV shift, blur, sharpen, noise) leave box labels alone.
# Compositional ops (mosaic, cutmix) rearrange pixels, so they translate,
# clip and re-own the boxes as part of the transform. Everything is seeded:
# the same AugSeed always produces the same augmented patch.

import numpy as np

from mitofuse import (
    AugSeed,
    BBox,
    LabeledPatch,
    cutmix,
    gaussian_blur,
    gaussian_noise,
    hsv_shift,
    mosaic,
    sharpen,
)

rng = np.random.default_rng(0)

# A fake stained-tissue patch: pink-ish background with a dark blob where
# the object of interest sits, plus its box label.

patch = np.full((128, 128, 3), (225, 180, 200), dtype=np.uint8)
patch[40:70, 50:80] = (90, 40, 110)
labeled = LabeledPatch(patch, (BBox(50.0, 40.0, 80.0, 70.0),))

# Stain intensity varies between labs; hue/saturation shifts imitate that.
# A pure value scale of 0.9 darkens uniformly, channel order preserved.

shifted = hsv_shift(patch, hue_shift_deg=12.0, sat_scale=1.15, val_scale=0.9)
print(f"hsv shift: mean {patch.mean():.1f} -> {shifted.mean():.1f}")

# Blur and sharpen are a matched pair around the same Gaussian kernel.
# Identity parameters really are the identity, which keeps augmentation
# schedules honest when a parameter draw lands on "off".

blurred = gaussian_blur(patch, sigma=1.5)
sharp = sharpen(patch, amount=0.6, sigma=1.5)
print(f"blur keeps constant areas fixed: {bool((blurred[:30, :30] == patch[:30, :30]).all())}")
print(f"sharpen(amount=0) is identity: {bool((sharpen(patch, 0.0) == patch).all())}")

# Sensor noise, seeded. Two calls with the same seed agree exactly; the
# sequence number varies the draw within one run without a new seed.

n1 = gaussian_noise(patch, sigma=6.0, seed=AugSeed(42))
n2 = gaussian_noise(patch, sigma=6.0, seed=AugSeed(42))
n3 = gaussian_noise(patch, sigma=6.0, seed=AugSeed(42, sequence=1))
print(f"same seed, same noise: {bool((n1 == n2).all())}; "
      f"next sequence differs: {not bool((n1 == n3).all())}")

# Mosaic: four labeled patches composited around a random center point.
# Each input is cropped to its quadrant and its boxes are translated along;
# boxes that lose more than 75% of their area to the crop are dropped.

inputs = []
for k in range(4):
    img = np.full((128, 128, 3), 50 + 50 * k, dtype=np.uint8)
    img[20:60, 20:60] = 255
    inputs.append(LabeledPatch(img, (BBox(20.0, 20.0, 60.0, 60.0),)))

mos = mosaic(inputs, out_size=192, seed=AugSeed(7))
print(f"\nmosaic: 4 patches with {sum(len(p.boxes) for p in inputs)} boxes -> "
      f"{mos.patch.shape[1]}x{mos.patch.shape[0]} canvas with {len(mos.boxes)} boxes")
for b in mos.boxes:
    print(f"  box ({b.x1:6.1f}, {b.y1:6.1f}, {b.x2:6.1f}, {b.y2:6.1f})")

# CutMix: transplant a random rectangle from a source patch into a target.
# Box ownership follows box centers: a label belongs to the rectangle's
# content if its center lies inside, to the target otherwise.

target = LabeledPatch(
    np.full((128, 128, 3), 30, dtype=np.uint8),
    (BBox(10.0, 10.0, 40.0, 40.0),),
)
source = LabeledPatch(
    np.full((128, 128, 3), 220, dtype=np.uint8),
    (BBox(30.0, 30.0, 100.0, 100.0),),
)
mixed = cutmix(target, source, seed=AugSeed(3))
changed = (mixed.patch != target.patch).any(axis=2)
print(f"\ncutmix transplanted {int(changed.sum())} px "
      f"({100.0 * changed.mean():.0f}% of the target), {len(mixed.boxes)} boxes after")
