"""HTTP facade over the control center.

Thin by design: handlers translate between JSON and ControlCenter calls and
map outcomes onto status codes. No broker logic lives here.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .service import ControlCenter


class ExperimentRequestBody(BaseModel):
    model_config_doc: dict = Field(alias="model_config")
    settings: dict

    model_config = {"populate_by_name": True, "protected_namespaces": ()}

    def request_doc(self) -> dict:
        return {"model_config": self.model_config_doc, "settings": self.settings}


class SubmitResponse(BaseModel):
    experiment_id: str


class FetchModelResponse(BaseModel):
    path: str


def create_app(cc: ControlCenter, model_dir: str | Path = "models") -> FastAPI:
    app = FastAPI(title="federation control", version="1.0")
    model_root = Path(model_dir)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "client_id": cc.runtime.identity.client_id}

    @app.get("/api/network")
    def network() -> dict:
        return {"nodes": cc.get_network_status()}

    @app.get("/api/experiments")
    def experiments() -> dict:
        return {"experiments": cc.list_experiments()}

    @app.get("/api/experiments/{experiment_id}")
    def experiment(experiment_id: str) -> dict:
        exp = cc.get_experiment(experiment_id)
        if exp is None:
            raise HTTPException(status_code=404, detail="unknown experiment")
        return exp

    @app.post("/api/experiments", status_code=201, response_model=SubmitResponse)
    def submit(body: ExperimentRequestBody):
        outcome = cc.submit_experiment(body.request_doc())
        if outcome.accepted:
            return SubmitResponse(experiment_id=outcome.experiment_id)
        if outcome.reason == "busy":
            raise HTTPException(status_code=409, detail="parameter server busy")
        if outcome.reason == "unreachable":
            raise HTTPException(status_code=504, detail="parameter server unreachable")
        return JSONResponse(
            status_code=400,
            content={"detail": "validation failed",
                     "validation": outcome.validation or {"valid": False, "errors": []}},
        )

    @app.post("/api/experiments/{experiment_id}/model",
              response_model=FetchModelResponse)
    def fetch_model(experiment_id: str):
        destination = model_root / f"{experiment_id}.weights"
        try:
            path = cc.request_final_model(experiment_id, destination)
        except LookupError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except TimeoutError as exc:
            raise HTTPException(status_code=504, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except OSError as exc:
            raise HTTPException(status_code=500, detail=f"write failed: {exc}")
        return FetchModelResponse(path=str(path))

    return app
