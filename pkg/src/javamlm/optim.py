import torch


class AdamW(torch.optim.Optimizer):
    """Adam with decoupled weight decay.

    Each step applies ``p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)``
    where the decay term uses the parameter value from before the step.
    Groups with ``weight_decay=0`` are left undecayed (biases, layer norms).
    """

    def __init__(self, params, lr=5e-5, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        if lr < 0:
            raise ValueError(f"invalid learning rate {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"invalid betas {betas}")
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            lr = group["lr"]
            beta1, beta2 = group["betas"]
            eps = group["eps"]
            wd = group["weight_decay"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if not state:
                    state["step"] = 0
                    state["exp_avg"] = torch.zeros_like(p)
                    state["exp_avg_sq"] = torch.zeros_like(p)
                state["step"] += 1
                t = state["step"]
                m, v = state["exp_avg"], state["exp_avg_sq"]
                m.mul_(beta1).add_(p.grad, alpha=1 - beta1)
                v.mul_(beta2).addcmul_(p.grad, p.grad, value=1 - beta2)
                m_hat = m / (1 - beta1 ** t)
                v_hat = v / (1 - beta2 ** t)
                update = m_hat / (v_hat.sqrt() + eps)
                if wd != 0:
                    update.add_(p, alpha=wd)
                p.sub_(update, alpha=lr)
        return loss


def param_groups(model: torch.nn.Module, weight_decay: float) -> list[dict]:
    """Split parameters into decayed weights and undecayed biases / layer-norm scales."""
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        if name.endswith("bias") or "norm" in name:
            no_decay.append(p)
        else:
            decay.append(p)
    return [
        {"params": decay, "weight_decay": weight_decay},
        {"params": no_decay, "weight_decay": 0.0},
    ]


def constant_schedule(step: int) -> float:
    return 1.0


def linear_warmup(warmup_steps: int):
    def schedule(step: int) -> float:
        return min(1.0, (step + 1) / max(1, warmup_steps))
    return schedule

