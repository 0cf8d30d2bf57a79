"""A miniature end-to-end training run (about a minute on CPU).

Generates a small single-contact dataset at reduced resolution, trains the
regression baseline and a small heatmap model for a few epochs, and compares
their predictions on held-out samples.  Uses the same pipeline the CLI
drives, just shrunk.
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from touchmap import (
    CnnBaseline,
    CnnBaselineSpec,
    GridMapping,
    KernelParams,
    UNet,
    UNetSpec,
    build_dataset,
    load_dataset,
    split_dataset,
)
from touchmap.sim import SamplerConfig, SimConfig
from touchmap.training import TrainConfig, predict_contacts_batch, train

RES = 32


def fit(tag, model, train_view, val_view, cfg):
    t0 = time.time()
    result = train(model, train_view, val_view, cfg)
    first, last = result.history[0], result.history[-1]
    print(f"  {tag}: {len(result.history)} epochs in {time.time() - t0:4.1f}s   "
          f"train loss {first[1]:.4f} -> {last[1]:.4f}   best val {result.best_val_loss:.4f}")
    return result


def main():
    sim = SimConfig(image_resolution=RES)
    mapping = GridMapping(resolution=RES)
    kernel = KernelParams()

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp) / "tiny_ds"
        print(f"generating 300 single-contact samples at {RES}x{RES} ...")
        build_dataset(root, master_seed=3, scenario={"single": 300}, sim_cfg=sim,
                      kernel=kernel, mapping=mapping, sampler=SamplerConfig())
        view = load_dataset(root)
        train_view, val_view = split_dataset(view, 0.8, seed=3)
        print(f"  {len(train_view)} train / {len(val_view)} validation\n")

        cfg = TrainConfig(max_epochs=6, seed=3)
        rng = np.random.default_rng(3)
        print("training (reduced-size models):")
        cnn = CnnBaseline(CnnBaselineSpec(stage_channels=(8, 16, 32), input_hw=RES), rng)
        fit("cnn baseline ", cnn, train_view, val_view, cfg)
        unet = UNet(UNetSpec(base_channels=8, depth=2, out_resolution=RES), rng)
        fit("heatmap model", unet, train_view, val_view, cfg)

        print("\nheld-out predictions (first 5 validation samples):")
        cnn_preds = predict_contacts_batch(cnn, val_view.images[:5], mapping)
        unet_preds = predict_contacts_batch(unet, val_view.images[:5], mapping)
        for i in range(5):
            c = val_view.labels[i][0]
            cp = cnn_preds[i][0]
            err_c = np.hypot(cp.x_mm - c.x_mm, cp.y_mm - c.y_mm)
            if unet_preds[i]:
                up = unet_preds[i][0]
                unet_txt = f"heatmap err {np.hypot(up.x_mm - c.x_mm, up.y_mm - c.y_mm):5.2f} mm"
            else:
                unet_txt = "heatmap: no peak above threshold yet"
            print(f"  truth ({c.x_mm:+6.2f}, {c.y_mm:+6.2f}, d={c.depth_mm:4.2f})   "
                  f"cnn err {err_c:5.2f} mm   {unet_txt}")
        print("\n(both models improve sharply with the full-size dataset and epoch budget;")
        print(" see the README acceptance-test instructions for the complete experiment)")


if __name__ == "__main__":
    main()
