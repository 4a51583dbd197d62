"""Figure rendering for CLI reports (non-interactive backend)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def field_map(grid, U, path, title="u", component=0):
    """Solution on the (a, b) wedge at the first transverse node."""
    vals = np.where(grid.mask, U[:, :, 0, 0, component], np.nan)
    fig, ax = plt.subplots(figsize=(5, 4))
    ext = [0, grid.N * grid.h, 0, grid.N * grid.h]
    im = ax.imshow(vals.T, origin="lower", extent=ext, aspect="equal", cmap="viridis")
    ax.set_xlabel("a = x0 - x1")
    ax.set_ylabel("b = x0 + x1")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    return _save(fig, path)


def trace_plot(t, series, path, ylabel, logy=True):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in series.items():
        y = np.asarray(y, dtype=float)
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(t, y, marker=".", label=label)
    if logy and np.any(np.isfinite([np.nanmax(np.asarray(v, float)) if len(v) else np.nan for v in series.values()])):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend()
    return _save(fig, path)


def convergence_plot(h, err, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    h = np.asarray(h)
    err = np.asarray(err)
    ax.loglog(h, np.where(err > 0, err, np.nan), "o-", label="max error")
    if err[0] > 0:
        ax.loglog(h, err[0] * (h / h[0]) ** 2, "k--", label="slope 2")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend()
    return _save(fig, path)


def ratio_plot(d, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    d = np.asarray(d, dtype=float)
    ax.semilogy(np.arange(1, len(d) + 1), np.where(d > 0, d, np.nan), "o-")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("sup |u_(k+1) - u_k|")
    return _save(fig, path)


def bar_plot(names, values, path, ylabel="value"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(names)), values)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
