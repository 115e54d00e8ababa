#pragma once

// A desk-scale-in-miniature run config shared by the io/cli/sweep tests:
// small enough that a pretrain + clean cycle takes well under a second.
inline const char* micro_config_json() {
    return R"({
  "output_dir": "OUT",
  "world": {"num_classes": 4, "d_img": 12, "d_txt": 10, "noise_sigma": 0.3, "seed": 71},
  "trigger": {"patch_len": 4, "target_class": 0, "seed": 19},
  "data": {"pretrain_rows": 64, "poison_count": 6, "templates_per_class": 2,
           "clean_rows": 32, "residual_poison": 0, "clean_seed": 7},
  "eval": {"rows": 40, "seed": 111, "asr_seed": 222},
  "encoder": {"image_dims": [12, 8, 4], "text_dims": [10, 8, 4], "seed": 5},
  "pretrain": {"objective": "MMCL", "epochs": 2, "batch_size": 16, "peak_lr": 0.005,
               "warmup_steps": 2, "seed": 9, "eval_every": 1},
  "clean": {"loss_mode": "MMCL_SSL", "epochs": 2, "batch_size": 16, "lr": 0.003,
            "warmup_steps": 2, "seed": 51}
})";
}
