import asyncio
import logging
from typing import Any, Dict, Optional

import aiohttp
import backoff

from flightfix.services.api.base import AdvisorBackend, AdvisorUnavailable, CompletionResult, ParseError
from flightfix.services.api.prompt import RepairPrompt


logger = logging.getLogger(__name__)

TRANSPORT_ERRORS = (aiohttp.ClientError, asyncio.TimeoutError)


class RemoteBackend(AdvisorBackend):
    """Chat-completion endpoint reached over HTTPS with bearer authentication."""


    def __init__(self,
                endpoint: str,
                model_name: str,
                api_key: str,
                timeout: float = 30.0,
                max_retries: int = 2,
                backoff_base: float = 1.0,
                temperature: float = 0.0,
                max_tokens: int = 600,
                max_concurrent_requests: int = 4):
        self.endpoint = endpoint
        self.model_name = model_name
        self._api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.attempts = 0
        self._session: Optional[aiohttp.ClientSession] = None
        self._request_semaphore = asyncio.Semaphore(max_concurrent_requests)


    def __repr__(self) -> str:
        return f"RemoteBackend(endpoint={self.endpoint!r}, model_name={self.model_name!r})"


    async def __aenter__(self):
        await self.create_session()
        return self


    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close_session()


    async def create_session(self):
        if not self._session:
            self._session = aiohttp.ClientSession()


    async def close_session(self):
        if self._session:
            await self._session.close()
            self._session = None


    async def close(self) -> None:
        await self.close_session()


    def _request_body(self, prompt: RepairPrompt) -> Dict[str, Any]:
        return {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


    async def _post_once(self, body: Dict[str, Any]) -> Dict[str, Any]:
        if not self._session:
            await self.create_session()
        headers = {"Authorization": f"Bearer {self._api_key}"}
        logger.debug("POST %s model=%s (Authorization: Bearer ***)", self.endpoint, self.model_name)
        async with self._session.post(
            self.endpoint,
            json=body,
            headers=headers,
            timeout=aiohttp.ClientTimeout(total=self.timeout),
        ) as response:
            response.raise_for_status()
            return await response.json(content_type=None)


    @staticmethod
    def _describe(error: BaseException) -> str:
        # str() only: the repr of a response error carries the request headers
        return f"{type(error).__name__}: {error}"


    @staticmethod
    def _permanent(error: BaseException) -> bool:
        """Client errors other than rate limiting will not go away on retry."""
        return isinstance(error, aiohttp.ClientResponseError) and error.status < 500 and error.status != 429


    @classmethod
    def _log_retry(cls, details) -> None:
        logger.warning(
            "Advisor request failed (try %d), retrying in %.1fs: %s",
            details["tries"], details["wait"], cls._describe(details["exception"]),
        )


    async def complete(self, prompt: RepairPrompt) -> CompletionResult:
        body = self._request_body(prompt)
        tries = 0

        async def attempt() -> Dict[str, Any]:
            nonlocal tries
            tries += 1
            self.attempts += 1
            return await self._post_once(body)

        retrying = backoff.on_exception(
            backoff.expo,
            TRANSPORT_ERRORS,
            max_tries=self.max_retries + 1,
            factor=self.backoff_base,
            jitter=None,
            giveup=self._permanent,
            on_backoff=self._log_retry,
            logger=None,
        )(attempt)

        async with self._request_semaphore:
            try:
                data = await retrying()
            except TRANSPORT_ERRORS as e:
                raise AdvisorUnavailable(f"advisor unreachable after {tries} attempts: {self._describe(e)}") from e
            except ValueError as e:
                raise ParseError(f"advisor returned a non-JSON body: {e}") from e

        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise ParseError("unexpected completion response shape") from e
        if not isinstance(text, str):
            raise ParseError("completion content is not text")

        usage = data.get("usage") if isinstance(data, dict) else None
        if not isinstance(usage, dict):
            usage = {}
        tokens = {k: v for k, v in usage.items() if isinstance(v, int) and not isinstance(v, bool)}
        return CompletionResult(text=text, usage=tokens, attempts=tries)
