from typing import Dict, Generic, List, Tuple, TypeVar

from .exceptions import ItemExists, ItemNotFound


ItemType = TypeVar('ItemType')


class Registry(Generic[ItemType]):
    """Keyed store preserving registration order."""

    def __init__(self):
        self._items: Dict[str, ItemType] = {}

    def __contains__(self, key: str) -> bool:
        return key in self._items

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> List[Tuple[str, ItemType]]:
        return list(self._items.items())

    def keys(self) -> List[str]:
        return list(self._items.keys())

    def get(self, key: str) -> ItemType:
        try:
            return self._items[key]
        except KeyError:
            raise ItemNotFound(key)

    def get_all(self) -> List[ItemType]:
        return list(self._items.values())

    def register(self, item: ItemType, key: str, *, force: bool = False) -> str:
        """Store `item` under `key`. Replacing an item keeps its position.

        Raises:
            ItemExists: If `key` is taken and `force` is not set.
        """
        if key in self._items and not force:
            raise ItemExists(key)
        self._items[key] = item
        return key
